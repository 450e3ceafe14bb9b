//! Information percolation on a pixel grid: edge differences are revealed
//! one at a time.

use std::collections::HashSet;
use std::io::Write;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::targets::{QaryTarget, MAX_TABLE_SIZE};

/// Oriented edge between two neighbouring pixels `(row, col)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Edge {
    pub origin: (usize, usize),
    pub terminus: (usize, usize),
}

/// Ordered, oriented edge list of a `rows x cols` pixel grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EdgeSchedule {
    rows: usize,
    cols: usize,
    edges: Vec<Edge>,
}

impl EdgeSchedule {
    /// Row-major schedule: for each pixel, its right edge then its down edge.
    /// A grid with `m + 1` rows and `n + 1` columns has `2mn + m + n` edges.
    pub fn grid(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument("grid must have at least one pixel".into()));
        }
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                if c + 1 < cols {
                    edges.push(Edge { origin: (r, c), terminus: (r, c + 1) });
                }
                if r + 1 < rows {
                    edges.push(Edge { origin: (r, c), terminus: (r + 1, c) });
                }
            }
        }
        Ok(Self { rows, cols, edges })
    }

    /// Arbitrary ordering and orientation; every grid edge exactly once.
    pub fn from_edges(rows: usize, cols: usize, edges: Vec<Edge>) -> Result<Self> {
        let reference = Self::grid(rows, cols)?;
        let key = |e: &Edge| if e.origin <= e.terminus { (e.origin, e.terminus) } else { (e.terminus, e.origin) };
        let expected: HashSet<_> = reference.edges.iter().map(key).collect();
        let mut seen = HashSet::new();
        for e in &edges {
            let k = key(e);
            if !expected.contains(&k) {
                return Err(Error::InvalidArgument(format!("{e:?} is not a grid edge")));
            }
            if !seen.insert(k) {
                return Err(Error::InvalidArgument(format!("{e:?} appears twice")));
            }
        }
        if seen.len() != expected.len() {
            return Err(Error::InvalidArgument("schedule does not cover every edge".into()));
        }
        Ok(Self { rows, cols, edges })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    fn pixel(&self, p: (usize, usize)) -> usize {
        p.0 * self.cols + p.1
    }

    /// Difference field `x_terminus - x_origin` of a configuration.
    pub fn differences(&self, x: &[usize]) -> Vec<i64> {
        self.edges
            .iter()
            .map(|e| x[self.pixel(e.terminus)] as i64 - x[self.pixel(e.origin)] as i64)
            .collect()
    }

    /// CSV rows `(index, o_row, o_col, t_row, t_col)`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["index", "o_row", "o_col", "t_row", "t_col"])?;
        for (i, e) in self.edges.iter().enumerate() {
            wr.write_record([
                i.to_string(),
                e.origin.0.to_string(),
                e.origin.1.to_string(),
                e.terminus.0.to_string(),
                e.terminus.1.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PercolationResult {
    /// Revealed differences in schedule order.
    pub differences: Vec<i64>,
    /// Configuration with pixel `(0, 0)` set to its most probable value given
    /// the differences; present when anchoring was requested.
    pub anchored: Option<Vec<usize>>,
}

/// Reveals each edge difference from its exact conditional law given the
/// differences revealed before it.
pub fn simulate_information_percolation<R: Rng + ?Sized>(
    target: &QaryTarget,
    schedule: &EdgeSchedule,
    anchor: bool,
    rng: &mut R,
) -> Result<PercolationResult> {
    let pixels = schedule.rows * schedule.cols;
    if target.dim() != pixels {
        return Err(Error::Dimension { expected: pixels, got: target.dim() });
    }
    if target.table().len() > MAX_TABLE_SIZE {
        return Err(Error::InvalidArgument("grid too large to enumerate".into()));
    }
    let q = target.alphabet();
    let mut alive: Vec<(Vec<usize>, f64)> = target
        .table()
        .iter()
        .enumerate()
        .filter(|(_, p)| **p > 0.0)
        .map(|(idx, p)| (QaryTarget::config(pixels, q, idx), *p))
        .collect();
    let mut differences = Vec::with_capacity(schedule.len());
    for e in &schedule.edges {
        let (o, t) = (schedule.pixel(e.origin), schedule.pixel(e.terminus));
        let mut law: Vec<(i64, f64)> = Vec::new();
        for (x, w) in &alive {
            let d = x[t] as i64 - x[o] as i64;
            match law.iter_mut().find(|(v, _)| *v == d) {
                Some(entry) => entry.1 += w,
                None => law.push((d, *w)),
            }
        }
        law.sort_by_key(|(d, _)| *d);
        let total: f64 = law.iter().map(|(_, w)| w).sum();
        if !(total > 0.0) {
            return Err(Error::ZeroPosterior);
        }
        let mut u = rng.random::<f64>() * total;
        let mut chosen = law[law.len() - 1].0;
        for (d, w) in &law {
            if u < *w {
                chosen = *d;
                break;
            }
            u -= w;
        }
        differences.push(chosen);
        alive.retain(|(x, _)| x[t] as i64 - x[o] as i64 == chosen);
    }
    let anchored = anchor.then(|| {
        let mut best: Option<&(Vec<usize>, f64)> = None;
        for cand in &alive {
            match best {
                Some(b) if cand.1 <= b.1 => {}
                _ => best = Some(cand),
            }
        }
        best.map(|b| b.0.clone()).expect("revealed differences keep at least one configuration")
    });
    Ok(PercolationResult { differences, anchored })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::chain_rng;

    #[test]
    fn edge_counts() {
        for (rows, cols) in [(1, 1), (2, 1), (2, 2), (3, 4), (5, 2)] {
            let s = EdgeSchedule::grid(rows, cols).unwrap();
            let (m, n) = (rows - 1, cols - 1);
            assert_eq!(s.len(), 2 * m * n + m + n);
        }
    }

    #[test]
    fn single_pixel_has_nothing_to_reveal() {
        let target = QaryTarget::uniform(1, 3).unwrap();
        let s = EdgeSchedule::grid(1, 1).unwrap();
        let r = simulate_information_percolation(&target, &s, true, &mut chain_rng(0, 0)).unwrap();
        assert!(r.differences.is_empty());
        assert_eq!(r.anchored.unwrap().len(), 1);
    }

    #[test]
    fn from_edges_validation() {
        let e = Edge { origin: (0, 1), terminus: (0, 0) };
        assert!(EdgeSchedule::from_edges(1, 2, vec![e]).is_ok());
        assert!(EdgeSchedule::from_edges(1, 2, vec![e, e]).is_err());
        assert!(EdgeSchedule::from_edges(1, 2, vec![]).is_err());
        let far = Edge { origin: (0, 0), terminus: (1, 1) };
        assert!(EdgeSchedule::from_edges(2, 2, vec![far]).is_err());
    }

    #[test]
    fn two_pixel_difference_law() {
        let target = QaryTarget::uniform(2, 2).unwrap();
        let s = EdgeSchedule::grid(2, 1).unwrap();
        let mut rng = chain_rng(1, 0);
        let runs = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..runs {
            let r = simulate_information_percolation(&target, &s, false, &mut rng).unwrap();
            counts[(r.differences[0] + 1) as usize] += 1;
        }
        let expect = [0.25, 0.5, 0.25];
        for (c, p) in counts.iter().zip(expect) {
            let f = *c as f64 / runs as f64;
            assert!((f - p).abs() < 4.0 * (p * (1.0 - p) / runs as f64).sqrt());
        }
    }

    #[test]
    fn anchored_configuration_is_consistent() {
        let mut rng = chain_rng(2, 0);
        let target = QaryTarget::random(4, 3, &mut rng).unwrap();
        let s = EdgeSchedule::grid(2, 2).unwrap();
        for _ in 0..100 {
            let r = simulate_information_percolation(&target, &s, true, &mut rng).unwrap();
            let x = r.anchored.unwrap();
            assert_eq!(s.differences(&x), r.differences);
            assert!(target.prob(QaryTarget::index_of(3, &x)) > 0.0);
        }
    }

    #[test]
    fn csv_layout() {
        let s = EdgeSchedule::grid(2, 2).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "index,o_row,o_col,t_row,t_col");
        assert_eq!(lines[1], "0,0,0,0,1");
        assert_eq!(lines[2], "1,0,0,1,0");
        assert_eq!(lines.len(), 5);
    }
}
