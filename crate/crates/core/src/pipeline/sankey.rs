//! Cross-tabulated label flows between two schemes.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cluster::SchemeLabeling;
use crate::data::PeriodicalId;
use crate::error::{Error, Result};
use crate::io_util::write_with;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SankeyFlow {
    pub source: u32,
    pub target: u32,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SankeyFlowTable {
    pub source_scheme: String,
    pub target_scheme: String,
    pub source_names: Vec<String>,
    pub target_names: Vec<String>,
    /// Sorted by source, then target.
    pub flows: Vec<SankeyFlow>,
    /// Periodicals per source label, over the shared universe.
    pub source_totals: BTreeMap<u32, usize>,
}

/// Flows below `min(0.10 * n_source, 50)` periodicals are filtered out.
pub fn flow_threshold(n_source: usize) -> f64 {
    (0.10 * n_source as f64).min(50.0)
}

impl SankeyFlowTable {
    pub fn filtered(&self) -> Self {
        Self {
            flows: self
                .flows
                .iter()
                .filter(|f| f.count as f64 >= flow_threshold(self.source_totals[&f.source]))
                .cloned()
                .collect(),
            ..self.clone()
        }
    }

    /// `source_id \t source_name \t target_id \t target_name \t count`
    pub fn write(&self, path: &Path) -> Result<()> {
        write_with(path, |w| {
            for f in &self.flows {
                writeln!(
                    w,
                    "{}\t{}\t{}\t{}\t{}",
                    f.source,
                    self.source_names[f.source as usize],
                    f.target,
                    self.target_names[f.target as usize],
                    f.count
                )?;
            }
            Ok(())
        })
    }
}

/// Periodicals labeled by both schemes, ascending.
pub fn shared_universe(a: &SchemeLabeling, b: &SchemeLabeling) -> Vec<PeriodicalId> {
    a.periodicals().filter(|&p| b.label_of(p).is_some()).collect()
}

/// Returns the unfiltered and filtered tables over the shared universe.
pub fn export_sankey(a: &SchemeLabeling, b: &SchemeLabeling) -> Result<(SankeyFlowTable, SankeyFlowTable)> {
    let universe = shared_universe(a, b);
    if universe.is_empty() {
        return Err(Error::InvalidInput(format!("schemes {} and {} share no periodicals", a.name, b.name)));
    }
    if universe.len() < a.len().max(b.len()) {
        log::info!("flows {} -> {}: {} shared periodicals", a.name, b.name, universe.len());
    }
    let mut cells: BTreeMap<(u32, u32), usize> = BTreeMap::new();
    let mut source_totals: BTreeMap<u32, usize> = BTreeMap::new();
    for p in universe {
        let (s, t) = (a.label_of(p).unwrap(), b.label_of(p).unwrap());
        *cells.entry((s, t)).or_default() += 1;
        *source_totals.entry(s).or_default() += 1;
    }
    let table = SankeyFlowTable {
        source_scheme: a.name.clone(),
        target_scheme: b.name.clone(),
        source_names: a.label_names.clone(),
        target_names: b.label_names.clone(),
        flows: cells.into_iter().map(|((source, target), count)| SankeyFlow { source, target, count }).collect(),
        source_totals,
    };
    let filtered = table.filtered();
    Ok((table, filtered))
}
