//! Subcarrier allocation between model aggregation and information transfer.
//!
//! The horizon holds `M * S` resource blocks and aggregation needs exactly
//! `d * T` of them. The offline optimum hands the `MS - dT` blocks with the
//! highest best-of-N gains to transfer; the online rule mimics it causally by
//! thresholding the current block's best gain at the quantile q where the
//! expected transfer fraction equals `p_it = (MS - dT)/(MS)`. Two budget
//! corrections keep every run feasible with exact counts: once aggregation
//! has its quota the rest goes to transfer, and once transfer has its quota
//! the rest stays with aggregation.

use serde::Serialize;

use crate::channel::{max_gain, GainTensor, MaxGainDistribution, SymbolGains};
use crate::error::{Error, Result};
use crate::rng::Stream;

/// Transfer fraction, threshold and the exact integer quotas of one horizon.
#[derive(Debug, Clone, Copy)]
pub struct AllocationBudget {
    pub p_it: f64,
    /// Best-gain threshold; infinite when no blocks are left for transfer.
    pub q: f64,
    pub fl_quota: u64,
    pub it_quota: u64,
}

impl AllocationBudget {
    pub fn new(subcarriers: usize, symbols: usize, fl_demand: u64, n_devices: usize) -> Result<Self> {
        if subcarriers == 0 || symbols == 0 {
            return Err(Error::InvalidConfig("allocation grid dimensions must be positive".into()));
        }
        if n_devices == 0 {
            return Err(Error::InvalidInput("at least one transfer device required".into()));
        }
        let total = subcarriers as u64 * symbols as u64;
        if fl_demand > total {
            return Err(Error::Infeasible {
                required: fl_demand,
                available: total,
                min_symbols: fl_demand.div_ceil(subcarriers as u64),
            });
        }
        let it_quota = total - fl_demand;
        let p_it = it_quota as f64 / total as f64;
        let q = if it_quota == 0 {
            f64::INFINITY
        } else {
            MaxGainDistribution::new(n_devices)?.quantile_threshold(p_it)?
        };
        Ok(AllocationBudget {
            p_it,
            q,
            fl_quota: fl_demand,
            it_quota,
        })
    }
}

/// Decision counters of one allocation run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AllocatorStats {
    /// Blocks decided by the threshold (or coin) rule itself.
    pub rule_decided: u64,
    /// Of those, how many went to transfer.
    pub rule_it: u64,
    /// Blocks forced to transfer because aggregation already had its quota.
    pub forced_it: u64,
    /// Blocks left with aggregation after the transfer quota filled.
    pub trailing_fl: u64,
}

/// A complete assignment of every resource block: aggregation flag, transfer
/// device, and the ordered aggregation block list.
#[derive(Debug, Clone)]
pub struct AllocationGrid {
    subcarriers: usize,
    symbols: usize,
    devices: usize,
    /// Aggregation flags, linear index `symbol * subcarriers + subcarrier`.
    fl: Vec<bool>,
    /// Transfer assignee per block, same indexing.
    it: Vec<Option<u32>>,
    /// Linear indices of aggregation blocks in symbol-major order.
    fl_order: Vec<usize>,
}

impl AllocationGrid {
    /// Assembles a grid from raw flags without checking feasibility; the
    /// block order is derived from the flags. Intended for diagnostics and
    /// tests — allocators construct grids through the streaming machinery.
    pub fn from_parts(subcarriers: usize, symbols: usize, devices: usize, fl: Vec<bool>, it: Vec<Option<u32>>) -> Self {
        let fl_order = fl
            .iter()
            .enumerate()
            .filter_map(|(i, &f)| if f { Some(i) } else { None })
            .collect();
        AllocationGrid {
            subcarriers,
            symbols,
            devices,
            fl,
            it,
            fl_order,
        }
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn symbols(&self) -> usize {
        self.symbols
    }

    pub fn devices(&self) -> usize {
        self.devices
    }

    #[inline]
    pub fn rb_index(&self, subcarrier: usize, symbol: usize) -> usize {
        symbol * self.subcarriers + subcarrier
    }

    #[inline]
    pub fn is_fl(&self, subcarrier: usize, symbol: usize) -> bool {
        self.fl[self.rb_index(subcarrier, symbol)]
    }

    #[inline]
    pub fn it_device(&self, subcarrier: usize, symbol: usize) -> Option<usize> {
        self.it[self.rb_index(subcarrier, symbol)].map(|d| d as usize)
    }

    pub fn fl_count(&self) -> u64 {
        self.fl.iter().filter(|&&f| f).count() as u64
    }

    pub fn it_count(&self) -> u64 {
        self.it.iter().filter(|o| o.is_some()).count() as u64
    }

    /// Ordered aggregation blocks (symbol-major linear indices).
    pub fn fl_order(&self) -> &[usize] {
        &self.fl_order
    }

    /// Blocks assigned to each transfer device.
    pub fn per_device_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.devices];
        for assigned in self.it.iter().flatten() {
            counts[*assigned as usize] += 1;
        }
        counts
    }

    /// Run-length-encoded text export: a header line with the dimensions,
    /// then `count*F` / `count*<device>` tokens over the symbol-major scan.
    pub fn write_rle<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "M={} S={} N={}", self.subcarriers, self.symbols, self.devices)?;
        let token = |fl: bool, it: Option<u32>| -> String {
            if fl {
                "F".to_string()
            } else if let Some(d) = it {
                d.to_string()
            } else {
                "-".to_string()
            }
        };
        let mut run_start = 0usize;
        let mut tokens: Vec<String> = Vec::new();
        for i in 1..=self.fl.len() {
            let boundary = i == self.fl.len() || (self.fl[i] != self.fl[run_start] || self.it[i] != self.it[run_start]);
            if boundary {
                tokens.push(format!("{}*{}", i - run_start, token(self.fl[run_start], self.it[run_start])));
                run_start = i;
            }
        }
        writeln!(w, "{}", tokens.join(" "))?;
        Ok(())
    }

    /// Parses the [`write_rle`] format back into a grid.
    pub fn read_rle<R: std::io::BufRead>(mut r: R) -> Result<Self> {
        let mut header = String::new();
        r.read_line(&mut header)?;
        let mut dims = [0usize; 3];
        for (slot, part) in dims.iter_mut().zip(header.trim().split(' ')) {
            let value = part
                .split('=')
                .nth(1)
                .ok_or_else(|| Error::ConfigParse(format!("bad RLE header: {header}")))?;
            *slot = value
                .parse()
                .map_err(|_| Error::ConfigParse(format!("bad RLE header: {header}")))?;
        }
        let [subcarriers, symbols, devices] = dims;
        let mut body = String::new();
        r.read_line(&mut body)?;
        let mut fl = Vec::with_capacity(subcarriers * symbols);
        let mut it = Vec::with_capacity(subcarriers * symbols);
        for token in body.trim().split(' ').filter(|t| !t.is_empty()) {
            let (count, sym) = token
                .split_once('*')
                .ok_or_else(|| Error::ConfigParse(format!("bad RLE token: {token}")))?;
            let count: usize = count
                .parse()
                .map_err(|_| Error::ConfigParse(format!("bad RLE count in: {token}")))?;
            let (f, d) = match sym {
                "F" => (true, None),
                "-" => (false, None),
                other => (
                    false,
                    Some(
                        other
                            .parse::<u32>()
                            .map_err(|_| Error::ConfigParse(format!("bad RLE device in: {token}")))?,
                    ),
                ),
            };
            for _ in 0..count {
                fl.push(f);
                it.push(d);
            }
        }
        if fl.len() != subcarriers * symbols {
            return Err(Error::ConfigParse(format!(
                "RLE body has {} blocks, header says {}",
                fl.len(),
                subcarriers * symbols
            )));
        }
        Ok(AllocationGrid::from_parts(subcarriers, symbols, devices, fl, it))
    }
}

/// Machine-readable companion summary for an exported grid.
#[derive(Debug, Clone, Serialize)]
pub struct AllocationSummary {
    pub subcarriers: usize,
    pub symbols: usize,
    pub devices: usize,
    pub fl_count: u64,
    pub it_count: u64,
    pub p_it: f64,
    pub q: f64,
    pub per_device_counts: Vec<u64>,
}

impl AllocationSummary {
    pub fn new(grid: &AllocationGrid, budget: &AllocationBudget) -> Self {
        AllocationSummary {
            subcarriers: grid.subcarriers(),
            symbols: grid.symbols(),
            devices: grid.devices(),
            fl_count: grid.fl_count(),
            it_count: grid.it_count(),
            p_it: budget.p_it,
            q: budget.q,
            per_device_counts: grid.per_device_counts(),
        }
    }
}

enum DecisionRule {
    /// Transfer when the best gain meets the threshold.
    Threshold,
    /// Transfer with probability `p_it`, independent of the gains.
    Random(Stream),
}

/// Streaming allocator over per-symbol gains. Decisions for symbol `s` are
/// final before the gains of symbol `s + 1` are seen, which is what makes
/// the rule implementable in real time.
pub struct StreamingAllocator {
    budget: AllocationBudget,
    rule: DecisionRule,
    subcarriers: usize,
    symbols: usize,
    devices: usize,
    next_symbol: usize,
    processed: u64,
    i_total: u64,
    fl: Vec<bool>,
    it: Vec<Option<u32>>,
    stats: AllocatorStats,
}

impl StreamingAllocator {
    pub fn threshold(subcarriers: usize, symbols: usize, fl_demand: u64, n_devices: usize) -> Result<Self> {
        let budget = AllocationBudget::new(subcarriers, symbols, fl_demand, n_devices)?;
        Ok(Self::with_rule(budget, DecisionRule::Threshold, subcarriers, symbols, n_devices))
    }

    pub fn random(subcarriers: usize, symbols: usize, fl_demand: u64, n_devices: usize, seed: u64) -> Result<Self> {
        let budget = AllocationBudget::new(subcarriers, symbols, fl_demand, n_devices)?;
        Ok(Self::with_rule(
            budget,
            DecisionRule::Random(Stream::new(seed)),
            subcarriers,
            symbols,
            n_devices,
        ))
    }

    fn with_rule(budget: AllocationBudget, rule: DecisionRule, subcarriers: usize, symbols: usize, devices: usize) -> Self {
        let total = subcarriers * symbols;
        StreamingAllocator {
            budget,
            rule,
            subcarriers,
            symbols,
            devices,
            next_symbol: 0,
            processed: 0,
            i_total: 0,
            fl: vec![true; total],
            it: vec![None; total],
            stats: AllocatorStats::default(),
        }
    }

    pub fn budget(&self) -> &AllocationBudget {
        &self.budget
    }

    /// True while the allocator still needs gains of further symbols.
    pub fn needs_gains(&self) -> bool {
        self.next_symbol < self.symbols && self.i_total < self.budget.it_quota
    }

    /// Consumes the gains of the next symbol and fixes its decisions.
    pub fn decide_symbol(&mut self, gains: &SymbolGains) -> Result<()> {
        if self.next_symbol >= self.symbols {
            return Err(Error::InvalidInput("all symbols already decided".into()));
        }
        if gains.subcarriers != self.subcarriers || gains.devices != self.devices {
            return Err(Error::DimensionMismatch(format!(
                "symbol gains are {}x{}, allocator expects {}x{}",
                gains.subcarriers, gains.devices, self.subcarriers, self.devices
            )));
        }
        let s = self.next_symbol;
        for m in 0..self.subcarriers {
            self.processed += 1;
            if self.i_total >= self.budget.it_quota {
                self.stats.trailing_fl += 1;
                continue;
            }
            let (best, device) = max_gain(gains.at(m))?;
            let fl_if_kept = self.processed - self.i_total;
            let to_it = if fl_if_kept > self.budget.fl_quota {
                // Aggregation already has its quota; the block must transfer.
                self.stats.forced_it += 1;
                true
            } else {
                self.stats.rule_decided += 1;
                let transfer = match &mut self.rule {
                    DecisionRule::Threshold => best >= self.budget.q,
                    DecisionRule::Random(stream) => stream.next_f64() < self.budget.p_it,
                };
                if transfer {
                    self.stats.rule_it += 1;
                }
                transfer
            };
            if to_it {
                let rb = s * self.subcarriers + m;
                self.fl[rb] = false;
                self.it[rb] = Some(device as u32);
                self.i_total += 1;
            }
        }
        self.next_symbol += 1;
        Ok(())
    }

    pub fn stats(&self) -> AllocatorStats {
        self.stats
    }

    /// Finalizes the grid. Symbols never visited (the transfer quota filled
    /// early) keep their aggregation initialization.
    pub fn finish(mut self) -> Result<(AllocationGrid, AllocatorStats)> {
        if self.needs_gains() {
            return Err(Error::TruncatedStream(format!(
                "stream ended at symbol {} of {} with {} of {} transfer blocks assigned",
                self.next_symbol, self.symbols, self.i_total, self.budget.it_quota
            )));
        }
        if self.next_symbol < self.symbols {
            let skipped = (self.symbols - self.next_symbol) as u64 * self.subcarriers as u64;
            self.stats.trailing_fl += skipped;
        }
        let fl_order: Vec<usize> = self
            .fl
            .iter()
            .enumerate()
            .filter_map(|(i, &f)| if f { Some(i) } else { None })
            .collect();
        debug_assert_eq!(fl_order.len() as u64, self.budget.fl_quota);
        let grid = AllocationGrid {
            subcarriers: self.subcarriers,
            symbols: self.symbols,
            devices: self.devices,
            fl: self.fl,
            it: self.it,
            fl_order,
        };
        Ok((grid, self.stats))
    }
}

fn drive<I>(mut alloc: StreamingAllocator, stream: I) -> Result<AllocationGrid>
where
    I: IntoIterator<Item = SymbolGains>,
{
    let mut iter = stream.into_iter();
    while alloc.needs_gains() {
        let symbol = iter.next().ok_or_else(|| {
            Error::TruncatedStream(format!("gain stream ended before symbol {}", alloc.next_symbol))
        })?;
        alloc.decide_symbol(&symbol)?;
    }
    alloc.finish().map(|(grid, _)| grid)
}

/// Threshold-based online allocation over a causal per-symbol gain stream.
pub fn online_allocate<I>(
    stream: I,
    subcarriers: usize,
    symbols: usize,
    fl_demand: u64,
    n_devices: usize,
) -> Result<AllocationGrid>
where
    I: IntoIterator<Item = SymbolGains>,
{
    drive(StreamingAllocator::threshold(subcarriers, symbols, fl_demand, n_devices)?, stream)
}

/// Random subcarrier allocation at the same transfer fraction, with the same
/// budget corrections so the result is always feasible.
pub fn rsca_allocate<I>(
    stream: I,
    subcarriers: usize,
    symbols: usize,
    fl_demand: u64,
    n_devices: usize,
    seed: u64,
) -> Result<AllocationGrid>
where
    I: IntoIterator<Item = SymbolGains>,
{
    drive(StreamingAllocator::random(subcarriers, symbols, fl_demand, n_devices, seed)?, stream)
}

/// Non-causal optimum: the transfer quota goes to the blocks with the
/// highest best gains (ties broken by symbol-major position), each assigned
/// to its best device.
pub fn offline_allocate(gains: &GainTensor, fl_demand: u64) -> Result<AllocationGrid> {
    let budget = AllocationBudget::new(gains.subcarriers, gains.symbols, fl_demand, gains.devices)?;
    let total = gains.subcarriers * gains.symbols;
    let mut ranked: Vec<(f64, usize, usize)> = Vec::with_capacity(total);
    for s in 0..gains.symbols {
        for m in 0..gains.subcarriers {
            let (best, device) = gains.best(m, s);
            ranked.push((best, s * gains.subcarriers + m, device));
        }
    }
    ranked.sort_unstable_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let mut fl = vec![true; total];
    let mut it: Vec<Option<u32>> = vec![None; total];
    for &(_, rb, device) in ranked.iter().take(budget.it_quota as usize) {
        fl[rb] = false;
        it[rb] = Some(device as u32);
    }
    Ok(AllocationGrid::from_parts(gains.subcarriers, gains.symbols, gains.devices, fl, it))
}

/// One constraint violation found by [`validate_allocation`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// A block is flagged for aggregation and assigned to a device at once.
    DoubleUse { subcarrier: usize, symbol: usize },
    /// A block is assigned to a device index outside the system.
    UnknownDevice { subcarrier: usize, symbol: usize, device: u32 },
    /// The aggregation block count differs from the demand.
    FlCount { expected: u64, actual: u64 },
    /// The ordered block list disagrees with the flags.
    OrderMismatch,
}

/// Feasibility report for a grid against an aggregation demand.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks exclusivity, device validity, the exact aggregation count, and the
/// consistency of the ordered block list. Never fails; returns every
/// violation it finds.
pub fn validate_allocation(grid: &AllocationGrid, fl_demand: u64) -> ValidationReport {
    let mut violations = Vec::new();
    for s in 0..grid.symbols {
        for m in 0..grid.subcarriers {
            let rb = grid.rb_index(m, s);
            if grid.fl[rb] && grid.it[rb].is_some() {
                violations.push(Violation::DoubleUse { subcarrier: m, symbol: s });
            }
            if let Some(d) = grid.it[rb] {
                if d as usize >= grid.devices {
                    violations.push(Violation::UnknownDevice {
                        subcarrier: m,
                        symbol: s,
                        device: d,
                    });
                }
            }
        }
    }
    let actual = grid.fl_count();
    if actual != fl_demand {
        violations.push(Violation::FlCount {
            expected: fl_demand,
            actual,
        });
    }
    let expected_order: Vec<usize> = grid
        .fl
        .iter()
        .enumerate()
        .filter_map(|(i, &f)| if f { Some(i) } else { None })
        .collect();
    if expected_order != grid.fl_order {
        violations.push(Violation::OrderMismatch);
    }
    ValidationReport { violations }
}

/// Splits the ordered aggregation blocks into consecutive rounds of `d`.
pub fn partition_fl_rbs(grid: &AllocationGrid, d: usize) -> Result<Vec<Vec<usize>>> {
    if d == 0 {
        return Err(Error::InvalidInput("round dimension must be positive".into()));
    }
    let order = grid.fl_order();
    if !order.len().is_multiple_of(d) {
        return Err(Error::InvalidInput(format!(
            "{} aggregation blocks cannot split into rounds of {d}",
            order.len()
        )));
    }
    Ok(order.chunks(d).map(|c| c.to_vec()).collect())
}
