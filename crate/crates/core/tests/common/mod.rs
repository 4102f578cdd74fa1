#![allow(dead_code)]

use noisy_ergodic::mc::Stream;
use noisy_ergodic::{Kernel, Obs, Prob};

/// Seeded builder for random chains, observables and measures.
pub struct Gen(Stream);

impl Gen {
    pub fn new(seed: u64) -> Self {
        Gen(Stream::new(seed))
    }

    pub fn unit(&mut self) -> f64 {
        self.0.uniform()
    }

    pub fn below(&mut self, n: usize) -> usize {
        ((self.unit() * n as f64) as usize).min(n - 1)
    }

    pub fn range(&mut self, lo: usize, hi: usize) -> usize {
        lo + self.below(hi - lo + 1)
    }

    pub fn observable(&mut self, k: usize) -> Obs {
        Obs::new((0..k).map(|_| 2.0 * self.unit() - 1.0).collect()).unwrap()
    }

    /// Probability vector with roughly a third of its cells empty.
    pub fn measure(&mut self, k: usize) -> Prob {
        let mut w: Vec<f64> = (0..k).map(|_| if self.unit() < 0.33 { 0.0 } else { self.unit() }).collect();
        if w.iter().all(|&x| x == 0.0) {
            w[self.below(k)] = 1.0;
        }
        normalized(w)
    }

    /// Random row over `targets`, each target kept with probability `density`.
    fn row_over(&mut self, k: usize, targets: &[usize], density: f64) -> Vec<f64> {
        let mut row = vec![0.0; k];
        for &j in targets {
            if self.unit() < density {
                row[j] = self.unit() + 1e-3;
            }
        }
        if row.iter().all(|&x| x == 0.0) {
            row[targets[self.below(targets.len())]] = 1.0;
        }
        row
    }

    /// Arbitrary kernel, possibly reducible and periodic.
    pub fn kernel(&mut self, k: usize) -> Kernel {
        let all: Vec<usize> = (0..k).collect();
        let density = 0.05 + 0.6 * self.unit();
        let rows = (0..k).map(|_| self.row_over(k, &all, density)).collect();
        from_dense(rows)
    }

    /// Irreducible and aperiodic: a cycle through all states, self-loops
    /// and random extra edges.
    pub fn ergodic_aperiodic(&mut self, k: usize) -> Kernel {
        let all: Vec<usize> = (0..k).collect();
        let density = 0.3 * self.unit();
        let mut rows: Vec<Vec<f64>> = (0..k).map(|_| self.row_over(k, &all, density)).collect();
        self.add_cycle_and_loops(&mut rows, &all);
        from_dense(rows)
    }

    fn add_cycle_and_loops(&mut self, rows: &mut [Vec<f64>], block: &[usize]) {
        for (n, &i) in block.iter().enumerate() {
            let next = block[(n + 1) % block.len()];
            rows[i][next] += 0.2 + self.unit();
            rows[i][i] += 0.2 + self.unit();
        }
    }

    /// `p`-cyclic chain on `k >= p` states: groups `g` feed only group `g + 1 mod p`.
    pub fn cyclic(&mut self, k: usize, p: usize) -> Kernel {
        let group = |i: usize| i % p;
        let rows = (0..k)
            .map(|i| {
                let targets: Vec<usize> = (0..k).filter(|&j| group(j) == (group(i) + 1) % p).collect();
                let mut row = self.row_over(k, &targets, 0.7);
                for &j in &targets {
                    row[j] += 1e-2;
                }
                row
            })
            .collect();
        from_dense(rows)
    }

    /// Several closed irreducible blocks plus transient states that leak into them.
    pub fn reducible(&mut self, k: usize) -> Kernel {
        let mut order: Vec<usize> = (0..k).collect();
        for i in (1..k).rev() {
            order.swap(i, self.below(i + 1));
        }
        let blocks_n = self.range(1, 3.min(k));
        let transient = self.below(k / 4 + 1).min(k - blocks_n);
        let (trans, rest) = order.split_at(transient);
        let mut cuts: Vec<usize> = (1..rest.len()).collect();
        for i in (1..cuts.len()).rev() {
            cuts.swap(i, self.below(i + 1));
        }
        let mut cuts: Vec<usize> = cuts.into_iter().take(blocks_n - 1).collect();
        cuts.sort_unstable();
        let mut blocks = Vec::new();
        let mut start = 0;
        for c in cuts.into_iter().chain([rest.len()]) {
            blocks.push(rest[start..c].to_vec());
            start = c;
        }
        let mut rows = vec![vec![0.0; k]; k];
        for block in &blocks {
            let density = 0.3 * self.unit();
            for &i in block {
                rows[i] = self.row_over(k, block, density);
            }
            self.add_cycle_and_loops(&mut rows, block);
        }
        let all: Vec<usize> = (0..k).collect();
        for &i in trans {
            rows[i] = self.row_over(k, &all, 0.4);
            let b = &blocks[self.below(blocks.len())];
            rows[i][b[self.below(b.len())]] += 0.1 + self.unit();
        }
        from_dense(rows)
    }
}

pub fn normalized(w: Vec<f64>) -> Prob {
    let s: f64 = w.iter().sum();
    Prob::new(w.into_iter().map(|x| x / s).collect()).unwrap()
}

pub fn from_dense(rows: Vec<Vec<f64>>) -> Kernel {
    let rows: Vec<Vec<f64>> = rows
        .into_iter()
        .map(|r| {
            let s: f64 = r.iter().sum();
            r.into_iter().map(|x| x / s).collect()
        })
        .collect();
    Kernel::from_rows(&rows).unwrap()
}

pub fn dense_matvec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

pub fn dense_vecmat(v: &[f64], m: &[Vec<f64>]) -> Vec<f64> {
    (0..m.len()).map(|j| (0..m.len()).map(|i| v[i] * m[i][j]).sum()).collect()
}

pub fn dense_matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = a.len();
    (0..k)
        .map(|i| (0..k).map(|j| (0..k).map(|l| a[i][l] * b[l][j]).sum()).collect())
        .collect()
}
