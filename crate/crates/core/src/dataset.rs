//! Feature graphs and labelled datasets.
//!
//! A feature graph is the `5 x (M+1)` matrix
//!
//! ```text
//! [ I(n)     I(n-1)     ... I(n-M)
//!   Q(n)     Q(n-1)     ... Q(n-M)
//!   |x(n)|   |x(n-1)|   ... |x(n-M)|
//!   |x(n)|^2 |x(n-1)|^2 ... |x(n-M)|^2
//!   |x(n)|^3 |x(n-1)|^3 ... |x(n-M)|^3 ]
//! ```
//!
//! stored row-major. Labels are the I/Q components of the target sample.

use std::io::Write;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::signal::ComplexSeq;

pub const GRAPH_ROWS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGraph {
    memory_depth: usize,
    data: Vec<f64>,
}

impl FeatureGraph {
    pub fn from_row_major(memory_depth: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != GRAPH_ROWS * (memory_depth + 1) {
            return Err(Error::Shape(format!(
                "graph of depth {memory_depth} needs {} values, got {}",
                GRAPH_ROWS * (memory_depth + 1),
                data.len()
            )));
        }
        Ok(Self { memory_depth, data })
    }

    pub fn memory_depth(&self) -> usize {
        self.memory_depth
    }

    pub fn rows(&self) -> usize {
        GRAPH_ROWS
    }

    pub fn cols(&self) -> usize {
        self.memory_depth + 1
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let c = self.cols();
        &self.data[row * c..(row + 1) * c]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

pub fn build_feature_graph(x: &ComplexSeq, n: usize, memory_depth: usize) -> Result<FeatureGraph> {
    if n < memory_depth {
        return Err(Error::OutOfRange {
            index: n,
            min: memory_depth,
        });
    }
    if n >= x.len() {
        return Err(Error::Size {
            needed: n + 1,
            available: x.len(),
        });
    }
    Ok(graph_at(x.samples(), n, memory_depth))
}

pub(crate) fn graph_at(xs: &[Complex64], n: usize, memory_depth: usize) -> FeatureGraph {
    let cols = memory_depth + 1;
    let mut data = vec![0.0; GRAPH_ROWS * cols];
    for j in 0..cols {
        let s = xs[n - j];
        let r = s.norm();
        data[j] = s.re;
        data[cols + j] = s.im;
        data[2 * cols + j] = r;
        data[3 * cols + j] = r * r;
        data[4 * cols + j] = r * r * r;
    }
    FeatureGraph { memory_depth, data }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    /// Time index of the sample the graph ends at.
    pub index: usize,
    pub graph: FeatureGraph,
    /// `(I_out, Q_out)`.
    pub label: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub entries: Vec<Entry>,
    pub split: Split,
    pub memory_depth: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `sum(I^2 + Q^2)` over labels.
    pub fn label_energy(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.label[0] * e.label[0] + e.label[1] * e.label[1])
            .sum()
    }

    /// CSV with the flattened graph (row-major) then `i_out,q_out`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let cols = self.memory_depth + 1;
        let mut header: Vec<String> = (0..GRAPH_ROWS)
            .flat_map(|r| (0..cols).map(move |c| format!("x{r}_{c}")))
            .collect();
        header.push("i_out".into());
        header.push("q_out".into());
        writeln!(w, "{}", header.join(","))?;
        for e in &self.entries {
            let mut fields: Vec<String> = e.graph.as_slice().iter().map(|v| v.to_string()).collect();
            fields.push(e.label[0].to_string());
            fields.push(e.label[1].to_string());
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

/// Number of training entries for a 3:2 split.
pub fn train_count(count: usize) -> usize {
    (count * 3 + 2) / 5
}

/// Graphs for indices `M .. M+count` of `x`, labelled from `y`, split 3:2 by a
/// seeded permutation.
pub fn build_dataset(
    x: &ComplexSeq,
    y: &ComplexSeq,
    memory_depth: usize,
    count: usize,
    split_seed: u64,
) -> Result<(Dataset, Dataset)> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if count == 0 {
        return Err(Error::Config("dataset count must be >= 1".into()));
    }
    if x.len() < count + memory_depth {
        return Err(Error::Size {
            needed: count + memory_depth,
            available: x.len(),
        });
    }
    let xs = x.samples();
    let ys = y.samples();
    let mut entries: Vec<Entry> = (memory_depth..memory_depth + count)
        .map(|n| Entry {
            index: n,
            graph: graph_at(xs, n, memory_depth),
            label: [ys[n].re, ys[n].im],
        })
        .collect();

    let mut order: Vec<usize> = (0..count).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(split_seed));
    let n_train = train_count(count);
    let mut slots: Vec<Option<Entry>> = entries.drain(..).map(Some).collect();
    let mut take = |ids: &[usize]| -> Vec<Entry> {
        ids.iter().map(|&i| slots[i].take().expect("index used once")).collect()
    };
    let train = take(&order[..n_train]);
    let test = take(&order[n_train..]);
    Ok((
        Dataset {
            entries: train,
            split: Split::Train,
            memory_depth,
        },
        Dataset {
            entries: test,
            split: Split::Test,
            memory_depth,
        },
    ))
}

/// Post-inverse training data: graphs from the gain-normalized PA output,
/// labels from the PA input.
pub fn dpd_dataset(
    y_pa: &ComplexSeq,
    x_in: &ComplexSeq,
    gain: f64,
    memory_depth: usize,
    count: usize,
    split_seed: u64,
) -> Result<(Dataset, Dataset)> {
    if !(gain.is_finite() && gain > 0.0) {
        return Err(Error::Config(format!("normalization gain {gain} must be > 0")));
    }
    let normalized = y_pa.scaled(1.0 / gain)?;
    build_dataset(&normalized, x_in, memory_depth, count, split_seed)
}

/// Divide both sequences by the larger of their two peaks.
pub fn joint_normalize(x: &ComplexSeq, y: &ComplexSeq) -> Result<(ComplexSeq, ComplexSeq, f64)> {
    let peak = x.peak().max(y.peak());
    if peak == 0.0 {
        return Err(Error::Degenerate("both sequences are all-zero".into()));
    }
    Ok((x.scaled(1.0 / peak)?, y.scaled(1.0 / peak)?, 1.0 / peak))
}
