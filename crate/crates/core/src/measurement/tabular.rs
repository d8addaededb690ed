use std::io::Write;
use std::path::Path;

use super::{Backend, CostPolicy, Measured};
use crate::error::{Error, Result};
use crate::space::{Configuration, DesignSpace};

/// Fitness lookup table keyed by ordinal id, read from `id,fitness` CSV.
#[derive(Debug, Clone)]
pub struct TabularBackend {
    rows: Vec<Option<f64>>,
    cost: CostPolicy,
}

/// Reads `id,fitness` rows (with header).
pub fn read_table(path: impl AsRef<Path>) -> Result<Vec<(u64, f64)>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "id" || &headers[1] != "fitness" {
        return Err(Error::Backend(format!(
            "{}: expected header `id,fitness`",
            path.display()
        )));
    }
    let mut out = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let bad = || Error::Backend(format!("{}: malformed row {}", path.display(), line + 2));
        if record.len() != 2 {
            return Err(bad());
        }
        let id: u64 = record[0].trim().parse().map_err(|_| bad())?;
        let fitness: f64 = record[1].trim().parse().map_err(|_| bad())?;
        if !fitness.is_finite() || fitness < 0.0 {
            return Err(bad());
        }
        out.push((id, fitness));
    }
    Ok(out)
}

/// Writes `id,fitness` rows. Floats use shortest round-trip formatting.
pub fn write_table(path: impl AsRef<Path>, rows: impl IntoIterator<Item = (u64, f64)>) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "id,fitness")?;
    for (id, f) in rows {
        writeln!(w, "{id},{f}")?;
    }
    w.flush()?;
    Ok(())
}

impl TabularBackend {
    pub fn from_rows(space: &DesignSpace, rows: &[(u64, f64)], cost: CostPolicy) -> Result<Self> {
        let size = usize::try_from(space.size())
            .map_err(|_| Error::Backend("space too large for a table".into()))?;
        if rows.len() > size {
            return Err(Error::Backend(format!(
                "table has {} rows but the space has {size} configurations",
                rows.len()
            )));
        }
        let mut table = vec![None; size];
        for &(id, f) in rows {
            let slot = table.get_mut(id as usize).ok_or_else(|| {
                Error::Backend(format!("table id {id} outside space of size {size}"))
            })?;
            if slot.replace(f).is_some() {
                return Err(Error::Backend(format!("table lists id {id} twice")));
            }
        }
        Ok(Self { rows: table, cost })
    }

    pub fn load(path: impl AsRef<Path>, space: &DesignSpace, cost: CostPolicy) -> Result<Self> {
        Self::from_rows(space, &read_table(path)?, cost)
    }
}

impl Backend for TabularBackend {
    fn measure(&self, space: &DesignSpace, config: &Configuration) -> Result<Measured> {
        let id = space.id_of(config)?;
        self.rows
            .get(id as usize)
            .copied()
            .flatten()
            .map(|f| Measured::valid(f, self.cost.nominal_cost))
            .ok_or_else(|| Error::Backend(format!("table has no row for id {id}")))
    }

    fn cost_policy(&self) -> CostPolicy {
        self.cost
    }
}
