//! Scalar parameters and thresholds shared by the certifiers and the pipeline.

use serde::Serialize;

use crate::digraph::Digraph;

/// `k`-fold natural logarithm of `x`, clamped below at 1 (also when undefined).
pub fn iterated_log(x: f64, k: u32) -> f64 {
    let mut v = x;
    for _ in 0..k {
        if v.is_nan() || v <= 0.0 {
            return 1.0;
        }
        v = v.ln();
    }
    if v.is_finite() {
        v.max(1.0)
    } else {
        1.0
    }
}

/// Expansion rule "every v ∈ A has ≥ `degree` j-neighbours in B ⇒ |B| ≥ `ratio`·|A|"
/// for nonempty |A| ≤ `set_cap`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExpansionRule {
    pub degree: f64,
    pub ratio: f64,
    pub set_cap: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Thresholds {
    /// δ± ≥ d log n.
    pub a1_min: f64,
    /// Δ± ≤ 10⁶ d log n.
    pub a1_max: f64,
    /// degree d·lg2/lg4, ratio 10, |A| ≤ 2m.
    pub a2: ExpansionRule,
    /// degree d(log n)^{2/3}, ratio (log n)^{1/3}, |A| ≤ 2m.
    pub a3: ExpansionRule,
    /// |A| = m.
    pub a4_size: usize,
    /// |N±(A)| ≥ (1/2 + ε) n.
    pub a4_target: f64,
}

/// Every scalar the constructions read. `new` fills the thresholds from the
/// definition's formulas and the construction sizes from the desk defaults;
/// every field may be overridden afterwards.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParameterProfile {
    pub n: usize,
    pub d: f64,
    pub eps: f64,
    /// m = n·lg3 / (d log n), rounded up into [1, n].
    pub m: usize,
    /// Surrogates for log^[2] n .. log^[7] n.
    pub lg: [f64; 6],
    pub exhaustive_cap: usize,
    pub search_budget: usize,
    /// No value is claimed for n₀(ε); pipeline refuses n below this.
    pub min_n: usize,
    pub k: usize,
    pub ell: usize,
    pub r: usize,
    pub a_size: usize,
    pub strong_d0: usize,
    pub weak_d0: usize,
    pub retry_cap: usize,
    pub max_rounds: usize,
    pub thresholds: Thresholds,
}

impl ParameterProfile {
    pub fn new(n: usize, d: f64, eps: f64) -> Self {
        let nf = n.max(2) as f64;
        let lg = [2, 3, 4, 5, 6, 7].map(|k| iterated_log(nf, k));
        let m = medium_size(n, d, lg[1]);
        let mut p = ParameterProfile {
            n,
            d,
            eps,
            m,
            lg,
            exhaustive_cap: 14,
            search_budget: 4000,
            min_n: 0,
            k: 3,
            ell: 0,
            r: 0,
            a_size: 0,
            strong_d0: (nf.ln().cbrt().ceil() as usize).max(3),
            weak_d0: 10,
            retry_cap: 5,
            max_rounds: 10_000,
            thresholds: thresholds_for(n, d, eps, m, &lg),
        };
        p.set_desk_sizes();
        p
    }

    /// Profile for `dg` with d = p̂ n / (2 log n), p̂ the edge density.
    pub fn for_digraph(dg: &Digraph, eps: f64) -> Self {
        Self::new(dg.n(), estimate_d(dg), eps)
    }

    /// log^[k] n surrogate, k ∈ 2..=7.
    pub fn lg(&self, k: usize) -> f64 {
        self.lg[k - 2]
    }

    pub fn ln_n(&self) -> f64 {
        (self.n.max(2) as f64).ln()
    }

    /// Edge density implied by d.
    pub fn density(&self) -> f64 {
        (2.0 * self.d * self.ln_n() / self.n.max(1) as f64).clamp(1e-3, 1.0)
    }

    /// Recompute m and thresholds after changing n, d, ε or the surrogates.
    pub fn recompute(&mut self) {
        self.m = medium_size(self.n, self.d, self.lg[1]);
        self.thresholds = thresholds_for(self.n, self.d, self.eps, self.m, &self.lg);
    }

    /// Desk-scale construction sizes. The reservoir gets one contact per
    /// cover path plus slack that grows as the digraph gets sparser, A gets
    /// the same for the 2r spine endpoints, and ℓ takes whatever is left.
    pub fn set_desk_sizes(&mut self) {
        let n = self.n;
        let q = 1.0 - self.density().min(1.0);
        self.k = 3;
        // contacts for `links` connections plus four forest classes
        let pool = |links: usize| -> usize {
            let contacts = links + (links as f64 * q / 2.0).ceil() as usize;
            let forest = ((q * links as f64 / 3.0).ceil() as usize).max(1);
            contacts + 4 * forest
        };
        let floor_a = (self.eps * n as f64 / 40.0).ceil() as usize;
        let fit = |ell: usize| -> (usize, usize, usize) {
            let r = pool(ell).max(2);
            let a = pool(2 * r).max(floor_a);
            (r, a, a + 3 * ell + 4 * r)
        };
        let mut ell = 3;
        while fit(ell + 1).2 <= n {
            ell += 1;
        }
        let (r, a, _) = fit(ell);
        self.ell = ell;
        self.r = r;
        self.a_size = a;
    }

    /// The definition's asymptotic formulas for ℓ, r, k, kept for reports.
    pub fn asymptotic_sizes(&self) -> AsymptoticSizes {
        let nf = self.n.max(2) as f64;
        AsymptoticSizes {
            ell: nf * self.lg(2) / (nf.ln() * self.lg(5)),
            r: nf * self.lg(2) / (nf.ln() * self.lg(6)),
            k: self.lg(2),
            a: self.eps * nf / 40.0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AsymptoticSizes {
    pub ell: f64,
    pub r: f64,
    pub k: f64,
    pub a: f64,
}

fn medium_size(n: usize, d: f64, lg3: f64) -> usize {
    let nf = n.max(2) as f64;
    let m = nf * lg3 / (d * nf.ln());
    if m.is_finite() {
        (m.ceil() as usize).clamp(1, n.max(1))
    } else {
        n.max(1)
    }
}

fn thresholds_for(n: usize, d: f64, eps: f64, m: usize, lg: &[f64; 6]) -> Thresholds {
    let ln = (n.max(2) as f64).ln();
    let cap = (2 * m).min(n);
    Thresholds {
        a1_min: d * ln,
        a1_max: 1e6 * d * ln,
        a2: ExpansionRule {
            degree: d * lg[0] / lg[2],
            ratio: 10.0,
            set_cap: cap,
        },
        a3: ExpansionRule {
            degree: d * ln.powf(2.0 / 3.0),
            ratio: ln.cbrt(),
            set_cap: cap,
        },
        a4_size: m,
        a4_target: (0.5 + eps) * n as f64,
    }
}

/// d = p̂ n / (2 log n).
pub fn estimate_d(dg: &Digraph) -> f64 {
    let n = dg.n().max(2) as f64;
    let p = dg.edge_count() as f64 / (n * (n - 1.0));
    p * n / (2.0 * n.ln())
}
