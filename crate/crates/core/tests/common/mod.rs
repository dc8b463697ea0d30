//! Independent oracles shared by the integration and acceptance tests. Each
//! one recomputes a quantity from first principles without going through the
//! code path it checks.

#![allow(dead_code)]

use constraintmatch::nethead::ClusterHead;
use constraintmatch::pairloss::{mcl_loss_indexed, IndexedPair};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for v in 0..used.len() {
            if !used[v] {
                used[v] = true;
                prefix.push(v);
                rec(prefix, used, out);
                prefix.pop();
                used[v] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Minimum total cost over all permutations.
pub fn brute_force_assignment(cost: &Array2<f64>, perms: &[Vec<usize>]) -> f64 {
    perms
        .iter()
        .map(|p| p.iter().enumerate().map(|(r, &c)| cost[[r, c]]).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

/// ACC, NMI and ARI recomputed directly from the sample lists.
///
/// ACC tries every injective map from classes to clusters. ARI counts
/// agreeing and disagreeing sample pairs one by one. NMI uses joint and
/// marginal frequencies with the geometric-mean normaliser.
pub fn brute_force_metrics(preds: &[usize], labels: &[usize], k: usize, n_out: usize) -> (f64, f64, f64) {
    let n = preds.len();
    let mut best = 0usize;
    for perm in permutations(n_out) {
        // perm[class] is the cluster credited to that class.
        let hits = preds.iter().zip(labels).filter(|(&p, &y)| perm[y] == p).count();
        best = best.max(hits);
    }
    let acc = best as f64 / n as f64;

    let freq = |f: &dyn Fn(usize) -> bool| (0..n).filter(|&s| f(s)).count() as f64 / n as f64;
    let mut hy = 0.0;
    let mut hc = 0.0;
    let mut mi = 0.0;
    for y in 0..k {
        let py = freq(&|s| labels[s] == y);
        if py > 0.0 {
            hy -= py * py.ln();
        }
    }
    for c in 0..n_out {
        let pc = freq(&|s| preds[s] == c);
        if pc > 0.0 {
            hc -= pc * pc.ln();
        }
        for y in 0..k {
            let pj = freq(&|s| preds[s] == c && labels[s] == y);
            if pj > 0.0 {
                let py = freq(&|s| labels[s] == y);
                mi += pj * (pj / (pc * py)).ln();
            }
        }
    }
    let nmi = match (hy == 0.0, hc == 0.0) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        _ => (mi / (hy * hc).sqrt()).clamp(0.0, 1.0),
    };

    let (mut both, mut pred_only, mut label_only, mut neither) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..n {
        for j in i + 1..n {
            match (preds[i] == preds[j], labels[i] == labels[j]) {
                (true, true) => both += 1.0,
                (true, false) => pred_only += 1.0,
                (false, true) => label_only += 1.0,
                (false, false) => neither += 1.0,
            }
        }
    }
    let den = (both + pred_only) * (pred_only + neither) + (both + label_only) * (label_only + neither);
    let ari = if den == 0.0 { 1.0 } else { 2.0 * (both * neither - pred_only * label_only) / den };
    (acc, nmi, ari)
}

/// A random network, input batch and two pair sets (constrained and pseudo)
/// with soft targets, as used by the gradient oracle.
pub struct GradCase {
    pub model: ClusterHead,
    pub x: Array2<f64>,
    pub cons: Vec<IndexedPair>,
    pub pseudo: Vec<IndexedPair>,
    pub lambda: f64,
}

impl GradCase {
    pub fn random(seed: u64) -> Self {
        let mut r = rng(seed);
        let d = r.gen_range(1..=6);
        let hidden = r.gen_range(0..=2);
        let mut dims = vec![d];
        for _ in 0..hidden {
            dims.push(r.gen_range(1..=16));
        }
        dims.push(r.gen_range(2..=8));
        let model = ClusterHead::new(&dims, r.gen()).unwrap();
        let batch = r.gen_range(2..=10);
        let x = Array2::from_shape_fn((batch, d), |_| r.gen_range(-2.0..2.0));
        let pairs = |r: &mut ChaCha8Rng, m: usize, soft: bool| -> Vec<IndexedPair> {
            (0..m)
                .map(|_| {
                    let i = r.gen_range(0..batch);
                    let mut j = r.gen_range(0..batch - 1);
                    if j >= i {
                        j += 1;
                    }
                    let target = if soft { r.gen::<f64>() } else { f64::from(r.gen_range(0..2u8)) };
                    IndexedPair { i, j, target }
                })
                .collect()
        };
        let m = r.gen_range(1..=6);
        let cons = pairs(&mut r, m, false);
        let m = r.gen_range(0..=8);
        let pseudo = pairs(&mut r, m, true);
        let lambda = r.gen_range(0.0..2.0);
        Self { model, x, cons, pseudo, lambda }
    }

    /// `L_cons + λ·L_pseudo` evaluated through a forward pass.
    pub fn loss(&self, model: &ClusterHead) -> f64 {
        let p = model.forward_batch(self.x.view()).unwrap();
        let (lc, _) = mcl_loss_indexed(p.view(), &self.cons).unwrap();
        let (lp, _) = mcl_loss_indexed(p.view(), &self.pseudo).unwrap();
        lc + self.lambda * lp
    }

    pub fn analytic(&self) -> Vec<f64> {
        let cache = self.model.forward_cached(self.x.view()).unwrap();
        let (_, gc) = mcl_loss_indexed(cache.probs(), &self.cons).unwrap();
        let (_, gp) = mcl_loss_indexed(cache.probs(), &self.pseudo).unwrap();
        let upstream = gc + &(gp * self.lambda);
        self.model.backward_cached(&cache, upstream.view()).unwrap().iter().collect()
    }

    pub fn numeric(&self, h: f64) -> Vec<f64> {
        let n = self.model.num_params();
        (0..n)
            .map(|k| {
                let mut plus = self.model.clone();
                *plus.params_mut().nth(k).unwrap() += h;
                let mut minus = self.model.clone();
                *minus.params_mut().nth(k).unwrap() -= h;
                (self.loss(&plus) - self.loss(&minus)) / (2.0 * h)
            })
            .collect()
    }
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, or the absolute gap when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale < 1e-12 {
        norm(&diff)
    } else {
        norm(&diff) / scale
    }
}

/// Worst relative error of the network gradient oracle over `cases` seeds.
pub fn network_gradient_check(cases: u64) -> f64 {
    (0..cases)
        .map(|s| {
            let case = GradCase::random(s);
            relative_error(&case.analytic(), &case.numeric(1e-5))
        })
        .fold(0.0, f64::max)
}

/// Worst relative error of the pair-loss gradient with respect to the
/// probability entries themselves.
pub fn pairloss_gradient_check(cases: u64) -> f64 {
    let mut worst = 0.0f64;
    for s in 0..cases {
        let mut r = rng(1_000 + s);
        let rows = r.gen_range(2..=6);
        let k = r.gen_range(2..=6);
        // Interior points keep alignment scores away from the clamp.
        let mut p = Array2::from_shape_fn((rows, k), |_| r.gen_range(0.1..1.0));
        for mut row in p.rows_mut() {
            let sum = row.sum();
            row /= sum;
        }
        let pairs: Vec<IndexedPair> = (0..r.gen_range(1..=6))
            .map(|_| {
                let i = r.gen_range(0..rows);
                let j = (i + r.gen_range(1..rows)) % rows;
                IndexedPair { i, j, target: r.gen() }
            })
            .collect();
        let (_, g) = mcl_loss_indexed(p.view(), &pairs).unwrap();
        let h = 1e-5;
        let mut numeric = Vec::new();
        for idx in 0..p.len() {
            let (a, b) = (idx / k, idx % k);
            let mut q = p.clone();
            q[[a, b]] += h;
            let up = mcl_loss_indexed(q.view(), &pairs).unwrap().0;
            q[[a, b]] -= 2.0 * h;
            let down = mcl_loss_indexed(q.view(), &pairs).unwrap().0;
            numeric.push((up - down) / (2.0 * h));
        }
        worst = worst.max(relative_error(g.as_slice().unwrap(), &numeric));
    }
    worst
}

/// Random labelings: `(preds, labels, k, n_out)` with `n ≤ 50`, `k ≤ n_out ≤ 6`.
pub fn random_labeling(r: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>, usize, usize) {
    let k = r.gen_range(1..=5);
    let n_out = r.gen_range(k.max(2)..=6);
    let n = r.gen_range(1..=50);
    let labels = (0..n).map(|_| r.gen_range(0..k)).collect();
    let preds = (0..n).map(|_| r.gen_range(0..n_out)).collect();
    (preds, labels, k, n_out)
}
