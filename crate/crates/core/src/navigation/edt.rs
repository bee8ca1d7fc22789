//! Exact squared Euclidean distance transform on a 2D lattice
//! (separable lower-envelope-of-parabolas method).

/// Squared distance, in cell units, from each cell to the nearest seed
/// cell. `None` everywhere when there are no seeds.
pub fn squared_distance_field(rows: usize, cols: usize, seed: &[bool]) -> Option<Vec<u64>> {
    assert_eq!(seed.len(), rows * cols);
    if !seed.iter().any(|&s| s) {
        return None;
    }
    let n = rows.max(cols);
    let mut scratch = Scratch::new(n);
    let mut field: Vec<f64> = seed.iter().map(|&s| if s { 0.0 } else { f64::INFINITY }).collect();

    let mut line = vec![0.0; n];
    let mut out = vec![0.0; n];
    for c in 0..cols {
        for r in 0..rows {
            line[r] = field[r * cols + c];
        }
        scratch.transform(&line[..rows], &mut out[..rows]);
        for r in 0..rows {
            field[r * cols + c] = out[r];
        }
    }
    for r in 0..rows {
        let row = &mut field[r * cols..(r + 1) * cols];
        line[..cols].copy_from_slice(row);
        scratch.transform(&line[..cols], row);
    }
    Some(field.into_iter().map(|d| d as u64).collect())
}

struct Scratch {
    v: Vec<usize>,
    z: Vec<f64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Self { v: vec![0; n], z: vec![0.0; n + 1] }
    }

    fn transform(&mut self, f: &[f64], d: &mut [f64]) {
        let (v, z) = (&mut self.v, &mut self.z);
        let mut k: isize = -1;
        for q in 0..f.len() {
            if f[q].is_infinite() {
                continue;
            }
            loop {
                if k < 0 {
                    k = 0;
                    v[0] = q;
                    z[0] = f64::NEG_INFINITY;
                    z[1] = f64::INFINITY;
                    break;
                }
                let p = v[k as usize];
                let (qf, pf) = (q as f64, p as f64);
                let s = ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * qf - 2.0 * pf);
                if s <= z[k as usize] {
                    k -= 1;
                    continue;
                }
                k += 1;
                v[k as usize] = q;
                z[k as usize] = s;
                z[k as usize + 1] = f64::INFINITY;
                break;
            }
        }
        if k < 0 {
            d.fill(f64::INFINITY);
            return;
        }
        let mut k = 0usize;
        for (q, out) in d.iter_mut().enumerate() {
            while z[k + 1] < q as f64 {
                k += 1;
            }
            let dq = q as f64 - v[k] as f64;
            *out = dq * dq + f[v[k]];
        }
    }
}
