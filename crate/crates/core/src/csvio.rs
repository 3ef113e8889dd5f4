//! Trajectory CSV files: writing with stable column names and 17
//! significant digits, reading back, and finite-difference curve jets.

use std::collections::HashMap;
use std::io::{Read, Write};

use crate::algebroid::AlgebroidSpec;
use crate::config::ColumnGroup;
use crate::graded::{Convention, CurveJet};
use crate::jet::Jet;
use crate::lagrange::Trajectory;
use crate::reduce::ConservedQuantity;

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("missing column `{0}`")]
    MissingColumn(String),
}

/// `{:.16e}`, i.e. 17 significant digits; empty for a missing value.
pub fn format_value(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.16e}"),
        None => String::new(),
    }
}

/// Writes a header and rows of optional values.
pub fn write_table<W: Write>(out: W, header: &[String], rows: impl IntoIterator<Item = Vec<Option<f64>>>) -> Result<(), CsvError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.into_iter().map(format_value))?;
    }
    w.flush()?;
    Ok(())
}

pub fn x_column(a: usize) -> String {
    format!("x_{}", a + 1)
}

pub fn y_column(w: usize, a: usize) -> String {
    format!("y_{w}_{}", a + 1)
}

pub fn pi_column(u: usize, a: usize) -> String {
    format!("pi_{u}_{}", a + 1)
}

/// Writes a trajectory with columns `t, x_A, y_w_a, pi_U_a, energy`, one
/// column per monitored quantity, and `el_residual`, restricted to `groups`.
pub fn write_trajectory<W: Write>(
    out: W,
    traj: &Trajectory,
    monitors: &[ConservedQuantity],
    groups: &[ColumnGroup],
) -> Result<(), CsvError> {
    let Some(first) = traj.points.first() else {
        return write_table(out, &["t".to_string()], Vec::new());
    };
    let (n, k) = (first.x.len(), first.order());
    let m = first.y.first().map_or(0, Vec::len);
    let ladder = traj.momenta.as_ref().and_then(|p| p.first()).map_or(0, Vec::len);
    let mut header = Vec::new();
    for g in groups {
        match g {
            ColumnGroup::T => header.push("t".to_string()),
            ColumnGroup::X => header.extend((0..n).map(x_column)),
            ColumnGroup::Y => header.extend((1..=k).flat_map(|w| (0..m).map(move |a| y_column(w, a)))),
            ColumnGroup::Pi => header.extend((1..=ladder).flat_map(|u| (0..m).map(move |a| pi_column(u, a)))),
            ColumnGroup::Energy => header.push("energy".into()),
            ColumnGroup::Monitors => header.extend(monitors.iter().map(|q| q.name.clone())),
            ColumnGroup::ElResidual => header.push("el_residual".into()),
        }
    }
    let rows = (0..traj.len()).map(|i| {
        let mut row = Vec::with_capacity(header.len());
        let p = &traj.points[i];
        for g in groups {
            match g {
                ColumnGroup::T => row.push(Some(traj.times[i])),
                ColumnGroup::X => row.extend(p.x.iter().map(|v| Some(*v))),
                ColumnGroup::Y => row.extend(p.y.iter().flatten().map(|v| Some(*v))),
                ColumnGroup::Pi => {
                    if let Some(pi) = &traj.momenta {
                        row.extend(pi[i].iter().flatten().map(|v| Some(*v)));
                    }
                }
                ColumnGroup::Energy => row.push(traj.energy.get(i).copied()),
                ColumnGroup::Monitors => row.extend(monitors.iter().map(|q| q.values.get(i).copied())),
                ColumnGroup::ElResidual => row.push(traj.el_residual.get(i).copied().flatten()),
            }
        }
        row
    });
    write_table(out, &header, rows)
}

/// A table read back from CSV, addressed by column name. Empty cells are
/// `None`.
#[derive(Debug, Clone)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
    index: HashMap<String, usize>,
}

impl Table {
    pub fn new(header: Vec<String>, rows: Vec<Vec<Option<f64>>>) -> Self {
        let index = header.iter().enumerate().map(|(i, h)| (h.clone(), i)).collect();
        Table { header, rows, index }
    }

    pub fn write<W: Write>(&self, out: W) -> Result<(), CsvError> {
        write_table(out, &self.header, self.rows.iter().cloned())
    }

    pub fn read<R: Read>(input: R) -> Result<Self, CsvError> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|cell| {
                    if cell.is_empty() {
                        Ok(None)
                    } else {
                        cell.parse::<f64>().map(Some).map_err(|e| CsvError::Row {
                            row: i + 1,
                            message: format!("`{cell}`: {e}"),
                        })
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        Ok(Table::new(header, rows))
    }

    pub fn has(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn column(&self, name: &str) -> Result<Vec<Option<f64>>, CsvError> {
        let i = *self.index.get(name).ok_or_else(|| CsvError::MissingColumn(name.into()))?;
        Ok(self.rows.iter().map(|r| r.get(i).copied().flatten()).collect())
    }

    fn dense(&self, name: &str) -> Result<Vec<f64>, CsvError> {
        self.column(name)?
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                v.ok_or_else(|| CsvError::Row {
                    row: i + 1,
                    message: format!("empty `{name}`"),
                })
            })
            .collect()
    }
}

/// A curve sampled on a uniform grid: times, base points and the fiber levels
/// `y_1..y_L` present in the file.
#[derive(Debug, Clone)]
pub struct SampledCurve {
    pub times: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    /// `levels[w − 1][node]`.
    pub levels: Vec<Vec<Vec<f64>>>,
    pub step: f64,
}

/// Largest finite-difference derivative order supported by [`curve_jet`].
pub const MAX_DIFFERENCE_ORDER: usize = 4;

/// Spacing targeted by the difference stencils; rows are skipped so that the
/// effective spacing is close to it, which keeps rounding in higher
/// derivatives small.
const TARGET_SPACING: f64 = 0.02;

/// Seven-point central weights, `O(h⁶)` for orders 1 and 2 and `O(h⁴)` for 3
/// and 4.
fn stencil(d: usize) -> [f64; 7] {
    match d {
        1 => [-1.0 / 60.0, 3.0 / 20.0, -3.0 / 4.0, 0.0, 3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0],
        2 => [1.0 / 90.0, -3.0 / 20.0, 3.0 / 2.0, -49.0 / 18.0, 3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0],
        3 => [1.0 / 8.0, -1.0, 13.0 / 8.0, 0.0, -13.0 / 8.0, 1.0, -1.0 / 8.0],
        4 => [-1.0 / 6.0, 2.0, -13.0 / 2.0, 28.0 / 3.0, -13.0 / 2.0, 2.0, -1.0 / 6.0],
        _ => unreachable!("difference order {d}"),
    }
}

impl SampledCurve {
    /// Extracts `t`, `x_1..x_n` and every `y_w_1..y_w_m` block present.
    pub fn from_table(table: &Table, n: usize, m: usize) -> Result<Self, CsvError> {
        let times = table.dense("t")?;
        let cols = (0..n).map(|a| table.dense(&x_column(a))).collect::<Result<Vec<_>, _>>()?;
        let x = (0..times.len()).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
        let mut levels = Vec::new();
        for w in 1.. {
            if m > 0 && !table.has(&y_column(w, 0)) {
                break;
            }
            let cols = (0..m).map(|a| table.dense(&y_column(w, a))).collect::<Result<Vec<_>, _>>()?;
            levels.push((0..times.len()).map(|i| cols.iter().map(|c| c[i]).collect()).collect());
            if m == 0 {
                break;
            }
        }
        if levels.is_empty() {
            return Err(CsvError::MissingColumn(y_column(1, 0)));
        }
        let step = match times.as_slice() {
            [a, b, ..] => b - a,
            _ => 0.0,
        };
        for (i, pair) in times.windows(2).enumerate() {
            if ((pair[1] - pair[0]) - step).abs() > 1e-9 * step.abs().max(1.0) {
                return Err(CsvError::Row {
                    row: i + 2,
                    message: "time grid is not uniform".into(),
                });
            }
        }
        Ok(SampledCurve { times, x, levels, step })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Row stride used by the difference stencils.
    pub fn stride(&self) -> usize {
        if self.step > 0.0 {
            ((TARGET_SPACING / self.step).round() as usize).max(1)
        } else {
            1
        }
    }

    /// Jets of the curve at node `i` with a fiber jet of order `y_order`:
    /// derivatives of `y₁` below the top stored level come from the level
    /// columns, the rest from central differences of the top level, and the
    /// base jet is rebuilt from `ẋ = ρ(x) y₁`. `None` when the stencil does
    /// not fit inside the grid.
    pub fn curve_jet(
        &self,
        alg: &AlgebroidSpec,
        convention: Convention,
        i: usize,
        y_order: usize,
    ) -> Result<Option<CurveJet>, crate::Error> {
        let top = self.levels.len();
        let extra = (y_order + 1).saturating_sub(top);
        if extra > MAX_DIFFERENCE_ORDER {
            return Err(crate::Error::Unsupported(format!(
                "the curve stores {top} fiber levels; order {y_order} would need difference order {extra} > {MAX_DIFFERENCE_ORDER}"
            )));
        }
        let s = self.stride();
        if extra > 0 && (i < 3 * s || i + 3 * s >= self.len()) {
            return Ok(None);
        }
        let m = self.levels[0][i].len();
        let h = self.step * s as f64;
        let y1 = (0..m)
            .map(|a| {
                let derivs = (0..=y_order).map(|j| {
                    if j < top {
                        return self.levels[j][i][a] * convention.to_plain(j + 1);
                    }
                    let d = j + 1 - top;
                    let w = stencil(d);
                    let sum: f64 = (0..7).map(|q| w[q] * self.levels[top - 1][i + q * s - 3 * s][a]).sum();
                    sum * convention.to_plain(top) / h.powi(d as i32)
                });
                Jet::from_derivatives(derivs)
            })
            .collect();
        CurveJet::admissible(alg, &self.x[i], y1).map(Some)
    }
}
