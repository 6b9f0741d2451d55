use crate::error::{Error, Result};
use crate::model::AgeGrid;

/// Ordered age-bin edges `a'_0 < a'_1 < … < a'_K` covering `[0, 120]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgeBinScheme {
    edges: Vec<u32>,
}

pub const MAX_AGE: u32 = 120;

impl AgeBinScheme {
    pub fn new(edges: Vec<u32>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::config("an age-bin scheme needs at least two edges"));
        }
        if edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config(format!("age-bin edges must increase strictly: {edges:?}")));
        }
        if edges[0] != 0 || *edges.last().unwrap() != MAX_AGE {
            return Err(Error::config(format!("age bins must cover [0, {MAX_AGE}]: {edges:?}")));
        }
        Ok(AgeBinScheme { edges })
    }

    /// `<1, 1-4, 5-9, …, 95-99, 100+`: 22 bins.
    pub fn nationwide() -> Self {
        let mut edges = vec![0, 1];
        edges.extend((5..=100).step_by(5));
        edges.push(MAX_AGE);
        AgeBinScheme { edges }
    }

    /// `<1, 1-4, 5-14, 15-24, …, 75-84, 85+`: 11 bins.
    pub fn ten_year() -> Self {
        let mut edges = vec![0, 1];
        edges.extend((5..=85).step_by(10));
        edges.push(MAX_AGE);
        AgeBinScheme { edges }
    }

    pub fn edges(&self) -> &[u32] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bin(&self, i: usize) -> (u32, u32) {
        (self.edges[i], self.edges[i + 1])
    }

    pub fn bins(&self) -> impl ExactSizeIterator<Item = (u32, u32)> + '_ {
        self.edges.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn position(&self, lo: u32, hi: u32) -> Option<usize> {
        self.bins().position(|b| b == (lo, hi))
    }

    /// Bins that do not lie entirely inside `[lo, hi]`.
    pub fn outside(&self, window: (f64, f64)) -> Vec<bool> {
        self.bins()
            .map(|(a, b)| (a as f64) < window.0 || (b as f64) > window.1)
            .collect()
    }

    /// Model nodes belonging to each bin, by node age `a_j ∈ [lo, hi)`; the
    /// last bin also takes a node sitting exactly on the top edge.
    ///
    /// Only bins inside `window` must contain a node; others may be empty.
    pub fn node_sets(&self, grid: &AgeGrid, window: (f64, f64)) -> Result<Vec<Vec<usize>>> {
        let outside = self.outside(window);
        let top = MAX_AGE as f64;
        self.bins()
            .zip(outside)
            .map(|((lo, hi), out)| {
                let nodes: Vec<usize> = (0..grid.len())
                    .filter(|&j| {
                        let a = grid.age(j);
                        a >= lo as f64 && (a < hi as f64 || (hi as f64 == top && a <= top))
                    })
                    .collect();
                if nodes.is_empty() && !out {
                    return Err(Error::config(format!(
                        "age bin [{lo}, {hi}) contains no model node at spacing {}",
                        grid.delta_a()
                    )));
                }
                Ok(nodes)
            })
            .collect()
    }
}

/// Reads exporter age-group labels: `25-29`, `25-34 years`, `< 1 year`,
/// `85+`, `85+ years`, `100+`. Returns `[lo, hi)`.
pub fn parse_age_label(label: &str) -> Option<(u32, u32)> {
    let s = label.trim().trim_end_matches("years").trim_end_matches("year").trim();
    if let Some(rest) = s.strip_prefix('<') {
        let hi: u32 = rest.trim().parse().ok()?;
        return Some((0, hi));
    }
    if let Some(lo) = s.strip_suffix('+') {
        let lo: u32 = lo.trim().parse().ok()?;
        return (lo < MAX_AGE).then_some((lo, MAX_AGE));
    }
    let (a, b) = s.split_once('-')?;
    let lo: u32 = a.trim().parse().ok()?;
    let last: u32 = b.trim().parse().ok()?;
    (last >= lo).then_some((lo, last + 1))
}
