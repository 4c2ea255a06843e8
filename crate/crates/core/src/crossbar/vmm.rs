// SPDX-License-Identifier: Apache-2.0
//! Vector-matrix products: ideal Ohm/Kirchhoff and full nodal analysis with
//! wire resistance.
//!
//! Nodal model: row wire `i` is driven from its DAC through `r_source` plus
//! one `r_line` segment into cell `(i, 0)`, then `r_line` between adjacent
//! cells. Column wire `j` runs from cell `(0, j)` down to cell `(rows-1, j)`
//! in `r_line` segments and one more segment into a virtual-ground sense
//! amplifier. Zero resistances short their endpoints together.

use serde::{Deserialize, Serialize};

use super::CrossbarTile;
use crate::{Error, Result};

fn check_voltages(v: &[f64], rows: usize, v_max: f64) -> Result<()> {
    if v.len() != rows {
        return Err(Error::ShapeMismatch {
            context: "row voltages".into(),
            expected: format!("{rows}"),
            actual: format!("{}", v.len()),
        });
    }
    for (row, &x) in v.iter().enumerate() {
        if !(x.abs() <= v_max * (1.0 + 1e-12)) {
            return Err(Error::VoltageBound {
                row,
                volts: x,
                v_max,
            });
        }
    }
    Ok(())
}

/// `I_j = Σ_i g_ij v_i`.
pub fn vmm_ideal(tile: &CrossbarTile, v: &[f64], v_max: f64) -> Result<Vec<f64>> {
    check_voltages(v, tile.rows, v_max)?;
    let mut out = vec![0.0; tile.cols];
    for (i, &vi) in v.iter().enumerate() {
        if vi == 0.0 {
            continue;
        }
        let row = &tile.devices[i * tile.cols..(i + 1) * tile.cols];
        for (o, d) in out.iter_mut().zip(row) {
            *o += d.g * vi;
        }
    }
    Ok(out)
}

/// Which wire ends the row drivers connect to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveMode {
    #[default]
    OneSided,
    /// A second driver with the same voltage at the far end of each row.
    BothEnds,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum NodeRef {
    Free(usize),
    Driver(usize),
    Ground,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

/// Factored nodal system of one programmed tile; solve once per pass.
#[derive(Debug, Clone)]
pub struct NodalSolver {
    rows: usize,
    cols: usize,
    g: Vec<f64>,
    nodes: Vec<NodeRef>,
    n: usize,
    bw: usize,
    diag: Vec<f64>,
    /// Off-diagonal entries `(i, j, -A[i][j])` with `i > j`.
    couplings: Vec<(usize, usize, f64)>,
    /// Cholesky factor; row `i` holds `L[i][i-bw..=i]`.
    l: Vec<f64>,
    drive_links: Vec<(usize, usize, f64)>,
}

const REFINE_TRIGGER: f64 = 1e-10;
const TOLERANCE: f64 = 1e-8;

impl NodalSolver {
    pub fn new(tile: &CrossbarTile, r_line: f64, r_source: f64, mode: DriveMode) -> Result<Self> {
        if !(r_line >= 0.0 && r_source >= 0.0) {
            return Err(Error::Config(
                "wire resistances must be non-negative".into(),
            ));
        }
        let (rows, cols) = (tile.rows, tile.cols);
        let cells = rows * cols;
        let row_node = |i: usize, j: usize| 2 * (i * cols + j);
        let col_node = |i: usize, j: usize| 2 * (i * cols + j) + 1;
        let driver = |i: usize| 2 * cells + i;
        let ground = 2 * cells + rows;

        // (a, b, resistance)
        let mut elements: Vec<(usize, usize, f64)> =
            Vec::with_capacity(4 * cells + 2 * rows + cols);
        for i in 0..rows {
            elements.push((driver(i), row_node(i, 0), r_source + r_line));
            if mode == DriveMode::BothEnds {
                elements.push((driver(i), row_node(i, cols - 1), r_source + r_line));
            }
            for j in 0..cols {
                if j + 1 < cols {
                    elements.push((row_node(i, j), row_node(i, j + 1), r_line));
                }
                let below = if i + 1 < rows {
                    col_node(i + 1, j)
                } else {
                    ground
                };
                elements.push((col_node(i, j), below, r_line));
                elements.push((row_node(i, j), col_node(i, j), 1.0 / tile.g(i, j)));
            }
        }

        let mut uf = UnionFind((0..=ground).collect());
        for &(a, b, r) in &elements {
            if r == 0.0 {
                uf.union(a, b);
            }
        }
        let mut fixed: Vec<Option<NodeRef>> = vec![None; ground + 1];
        for i in 0..rows {
            let root = uf.find(driver(i));
            if fixed[root].is_some() {
                return Err(Error::Singular {
                    index: root,
                    pivot: 0.0,
                });
            }
            fixed[root] = Some(NodeRef::Driver(i));
        }
        let groot = uf.find(ground);
        if fixed[groot].is_some() {
            return Err(Error::Singular {
                index: groot,
                pivot: 0.0,
            });
        }
        fixed[groot] = Some(NodeRef::Ground);

        // Free sets numbered in order of their smallest member, which keeps the band narrow.
        let mut free_id: Vec<Option<usize>> = vec![None; ground + 1];
        let mut n = 0;
        let mut nodes = Vec::with_capacity(2 * cells);
        for x in 0..2 * cells {
            let root = uf.find(x);
            nodes.push(match fixed[root] {
                Some(f) => f,
                None => {
                    let id = *free_id[root].get_or_insert_with(|| {
                        n += 1;
                        n - 1
                    });
                    NodeRef::Free(id)
                }
            });
        }
        let resolve = |x: usize, uf: &mut UnionFind| -> NodeRef {
            if x < 2 * cells {
                nodes[x]
            } else {
                fixed[uf.find(x)].expect("boundary nodes are fixed")
            }
        };

        let mut couplings = Vec::new();
        let mut diag = vec![0.0; n];
        let mut drive_links = Vec::new();
        let mut bw = 0;
        for &(a, b, r) in &elements {
            if r == 0.0 {
                continue;
            }
            let c = 1.0 / r;
            match (resolve(a, &mut uf), resolve(b, &mut uf)) {
                (NodeRef::Free(p), NodeRef::Free(q)) if p != q => {
                    diag[p] += c;
                    diag[q] += c;
                    let (hi, lo) = if p > q { (p, q) } else { (q, p) };
                    bw = bw.max(hi - lo);
                    couplings.push((hi, lo, c));
                }
                (NodeRef::Free(_), NodeRef::Free(_)) => {}
                (NodeRef::Free(p), NodeRef::Driver(i)) | (NodeRef::Driver(i), NodeRef::Free(p)) => {
                    diag[p] += c;
                    drive_links.push((p, i, c));
                }
                (NodeRef::Free(p), NodeRef::Ground) | (NodeRef::Ground, NodeRef::Free(p)) => {
                    diag[p] += c
                }
                _ => {}
            }
        }
        let w = bw + 1;
        let mut a = vec![0.0; n * w];
        for (p, &d) in diag.iter().enumerate() {
            a[p * w + bw] = d;
        }
        for &(hi, lo, c) in &couplings {
            a[hi * w + bw - (hi - lo)] -= c;
        }
        let l = cholesky_band(&a, n, bw)?;
        Ok(Self {
            rows,
            cols,
            g: tile.conductances(),
            nodes,
            n,
            bw,
            diag,
            couplings,
            l,
            drive_links,
        })
    }

    pub fn unknowns(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    /// `A·X` for `m` right-hand sides stored node-major.
    fn mul_block(&self, x: &[f64], m: usize) -> Vec<f64> {
        let mut y: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(k, v)| self.diag[k / m] * v)
            .collect();
        for &(i, j, c) in &self.couplings {
            for r in 0..m {
                y[i * m + r] -= c * x[j * m + r];
                y[j * m + r] -= c * x[i * m + r];
            }
        }
        y
    }

    /// Forward and back substitution in place for `m` right-hand sides
    /// stored node-major (`b[node * m + rhs]`).
    fn substitute_block(&self, b: &mut [f64], m: usize) {
        let w = self.bw + 1;
        for i in 0..self.n {
            let row = &self.l[i * w..(i + 1) * w];
            let k0 = i.saturating_sub(self.bw);
            let (done, rest) = b.split_at_mut(i * m);
            let bi = &mut rest[..m];
            for k in k0..i {
                let lik = row[self.bw - (i - k)];
                if lik != 0.0 {
                    for (x, y) in bi.iter_mut().zip(&done[k * m..(k + 1) * m]) {
                        *x -= lik * y;
                    }
                }
            }
            let d = row[self.bw];
            bi.iter_mut().for_each(|x| *x /= d);
        }
        for i in (0..self.n).rev() {
            let row = &self.l[i * w..(i + 1) * w];
            let k0 = i.saturating_sub(self.bw);
            let (head, rest) = b.split_at_mut(i * m);
            let bi = &mut rest[..m];
            let d = row[self.bw];
            bi.iter_mut().for_each(|x| *x /= d);
            for k in k0..i {
                let lik = row[self.bw - (i - k)];
                if lik != 0.0 {
                    for (x, y) in head[k * m..(k + 1) * m].iter_mut().zip(bi.iter()) {
                        *x -= lik * y;
                    }
                }
            }
        }
    }

    /// Solves `A X = B` with iterative refinement, `m` columns node-major.
    fn solve_block(&self, b: &[f64], m: usize) -> Result<Vec<f64>> {
        let bnorm = b.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
        if bnorm == 0.0 {
            return Ok(vec![0.0; b.len()]);
        }
        let mut x = b.to_vec();
        self.substitute_block(&mut x, m);
        let mut rel = f64::INFINITY;
        for _ in 0..5 {
            let ax = self.mul_block(&x, m);
            let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
            rel = r.iter().fold(0.0_f64, |a, x| a.max(x.abs())) / bnorm;
            if rel <= REFINE_TRIGGER {
                break;
            }
            self.substitute_block(&mut r, m);
            x.iter_mut().zip(r).for_each(|(x, d)| *x += d);
        }
        if rel > TOLERANCE {
            return Err(Error::NotConverged {
                residual: rel,
                tolerance: TOLERANCE,
            });
        }
        Ok(x)
    }

    /// Sense currents for `m` drive vectors at once, `m` row-voltage vectors
    /// given back to back. Returns `m` current vectors back to back.
    fn currents_block(&self, vs: &[f64], m: usize) -> Result<Vec<f64>> {
        let mut b = vec![0.0; self.n * m];
        for &(p, i, c) in &self.drive_links {
            for r in 0..m {
                b[p * m + r] += c * vs[r * self.rows + i];
            }
        }
        let x = self.solve_block(&b, m)?;
        let mut out = vec![0.0; m * self.cols];
        for r in 0..m {
            let v = &vs[r * self.rows..(r + 1) * self.rows];
            let volt = |node: NodeRef| match node {
                NodeRef::Free(k) => x[k * m + r],
                NodeRef::Driver(i) => v[i],
                NodeRef::Ground => 0.0,
            };
            let o = &mut out[r * self.cols..(r + 1) * self.cols];
            for i in 0..self.rows {
                for (j, oj) in o.iter_mut().enumerate() {
                    let c = i * self.cols + j;
                    *oj += self.g[c] * (volt(self.nodes[2 * c]) - volt(self.nodes[2 * c + 1]));
                }
            }
        }
        Ok(out)
    }

    /// Effective `cols × rows` matrix `T` with `I = T v`, from one unit
    /// drive per row. The network is linear, so this is exact.
    pub fn transfer_matrix(&self) -> Result<Vec<f64>> {
        let mut eye = vec![0.0; self.rows * self.rows];
        for i in 0..self.rows {
            eye[i * self.rows + i] = 1.0;
        }
        let cur = self.currents_block(&eye, self.rows)?;
        // cur[i][j]: current in column j when row i is driven at 1 V
        let mut t = vec![0.0; self.cols * self.rows];
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[j * self.rows + i] = cur[i * self.cols + j];
            }
        }
        Ok(t)
    }

    /// Sense currents for row driver voltages `v`.
    pub fn solve(&self, v: &[f64], v_max: f64) -> Result<Vec<f64>> {
        check_voltages(v, self.rows, v_max)?;
        self.currents_block(v, 1)
    }
}

/// Cholesky factor of a symmetric positive definite band matrix stored by
/// lower rows.
fn cholesky_band(a: &[f64], n: usize, bw: usize) -> Result<Vec<f64>> {
    let w = bw + 1;
    let mut l = vec![0.0; n * w];
    for i in 0..n {
        let k0 = i.saturating_sub(bw);
        for j in k0..=i {
            let kj = j.saturating_sub(bw).max(k0);
            let li = &l[i * w + bw - (i - kj)..i * w + bw - (i - j)];
            let lj = &l[j * w + bw - (j - kj)..j * w + bw];
            let s: f64 = li.iter().zip(lj).map(|(x, y)| x * y).sum();
            let v = a[i * w + bw - (i - j)] - s;
            if i == j {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::Singular { index: i, pivot: v });
                }
                l[i * w + bw] = v.sqrt();
            } else {
                l[i * w + bw - (i - j)] = v / l[j * w + bw];
            }
        }
    }
    Ok(l)
}

/// One-shot nodal VMM. Prefer [`NodalSolver`] when the same tile is read
/// many times.
pub fn vmm_nonideal(
    tile: &CrossbarTile,
    v: &[f64],
    r_line: f64,
    r_source: f64,
    v_max: f64,
) -> Result<Vec<f64>> {
    NodalSolver::new(tile, r_line, r_source, DriveMode::OneSided)?.solve(v, v_max)
}
