//! Double-description enumeration of the extreme rays of a pointed cone
//! `{x : A x >= 0}`. Used both for facet enumeration of a point cloud and
//! for vertex enumeration of a bounded H-polytope.

const ZERO_EPS: f64 = 1e-9;

#[derive(Clone)]
struct Bits(Vec<u64>);

impl Bits {
    fn new(len: usize) -> Self {
        Bits(vec![0; len.div_ceil(64)])
    }
    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn and(&self, other: &Bits) -> Bits {
        Bits(self.0.iter().zip(&other.0).map(|(a, b)| a & b).collect())
    }
    fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }
    fn contains_all(&self, other: &Bits) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a & b == *b)
    }
}

struct Ray {
    dir: Vec<f64>,
    zeros: Bits,
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Picks `d` linearly independent rows by Gaussian elimination with partial
/// pivoting over rows. Returns `None` when the rank is below `d`.
fn independent_rows(rows: &[Vec<f64>], d: usize) -> Option<Vec<usize>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut pivots: Vec<usize> = Vec::new();
    let mut chosen = Vec::new();
    for (idx, row) in rows.iter().enumerate() {
        let mut r = row.clone();
        for (b, &p) in basis.iter().zip(&pivots) {
            let f = r[p];
            if f != 0.0 {
                r.iter_mut().zip(b).for_each(|(x, y)| *x -= f * y);
            }
        }
        let (p, mag) = r
            .iter()
            .enumerate()
            .map(|(i, v)| (i, v.abs()))
            .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        let scale = row.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
        if mag > 1e-9 * scale {
            let pv = r[p];
            r.iter_mut().for_each(|x| *x /= pv);
            basis.push(r);
            pivots.push(p);
            chosen.push(idx);
            if chosen.len() == d {
                return Some(chosen);
            }
        }
    }
    None
}

fn invert(m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let d = m.len();
    let mat = nalgebra::DMatrix::from_fn(d, d, |r, c| m[r][c]);
    let inv = mat.try_inverse()?;
    Some((0..d).map(|c| inv.column(c).iter().copied().collect()).collect())
}

/// Extreme rays of `{x in R^d : a·x >= 0 for every row a}`, each normalized
/// to unit length. The cone must be pointed (rows of rank `d`); otherwise
/// `None` is returned.
pub(crate) fn extreme_rays(rows: &[Vec<f64>], d: usize) -> Option<Vec<Vec<f64>>> {
    let m = rows.len();
    let init = independent_rows(rows, d)?;
    let init_rows: Vec<Vec<f64>> = init.iter().map(|&i| rows[i].clone()).collect();
    let inv_cols = invert(&init_rows)?;
    let mut rays: Vec<Ray> = inv_cols
        .into_iter()
        .enumerate()
        .map(|(k, mut dir)| {
            normalize(&mut dir);
            let mut zeros = Bits::new(m);
            for (j, &ri) in init.iter().enumerate() {
                if j != k {
                    zeros.set(ri);
                }
            }
            Ray { dir, zeros }
        })
        .collect();
    let mut processed = vec![false; m];
    for &i in &init {
        processed[i] = true;
    }

    for (i, row) in rows.iter().enumerate() {
        if processed[i] {
            continue;
        }
        processed[i] = true;
        let vals: Vec<f64> = rays.iter().map(|r| dot(row, &r.dir)).collect();
        let pos: Vec<usize> = (0..rays.len()).filter(|&k| vals[k] > ZERO_EPS).collect();
        let neg: Vec<usize> = (0..rays.len()).filter(|&k| vals[k] < -ZERO_EPS).collect();
        if neg.is_empty() {
            for (k, ray) in rays.iter_mut().enumerate() {
                if vals[k].abs() <= ZERO_EPS {
                    ray.zeros.set(i);
                }
            }
            continue;
        }
        let mut fresh: Vec<Ray> = Vec::new();
        for &p in &pos {
            for &n in &neg {
                let common = rays[p].zeros.and(&rays[n].zeros);
                if common.count() + 2 < d {
                    continue;
                }
                let adjacent = rays
                    .iter()
                    .enumerate()
                    .all(|(k, r)| k == p || k == n || !r.zeros.contains_all(&common));
                if !adjacent {
                    continue;
                }
                let (sp, sn) = (vals[p], vals[n]);
                let mut dir: Vec<f64> = rays[n]
                    .dir
                    .iter()
                    .zip(&rays[p].dir)
                    .map(|(rn, rp)| sp * rn - sn * rp)
                    .collect();
                if normalize(&mut dir) <= ZERO_EPS {
                    continue;
                }
                let mut zeros = common;
                zeros.set(i);
                fresh.push(Ray { dir, zeros });
            }
        }
        let mut kept: Vec<Ray> = Vec::with_capacity(rays.len() + fresh.len());
        for (k, mut ray) in rays.into_iter().enumerate() {
            if vals[k] < -ZERO_EPS {
                continue;
            }
            if vals[k].abs() <= ZERO_EPS {
                ray.zeros.set(i);
            }
            kept.push(ray);
        }
        kept.extend(fresh);
        rays = kept;
    }
    Some(rays.into_iter().map(|r| r.dir).collect())
}
