//! Test-only oracles, written against plain 4-vectors so they share no code
//! path with the library's projection machinery.

#![allow(dead_code)]

use kaon_bell::quasispin::PairState;
use kaon_bell::Complex64;

pub const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Single-kaon basis vectors over (K_S, K_L), keyed by name.
pub fn single(name: &str) -> [f64; 2] {
    match name {
        "KS" => [1.0, 0.0],
        "KL" => [0.0, 1.0],
        "K0" => [H, H],
        "K0bar" => [H, -H],
        other => panic!("unknown outcome {other}"),
    }
}

/// Kronecker product u ⊗ v as a 4-vector in (SS, SL, LS, LL) order.
pub fn kron(u: [f64; 2], v: [f64; 2]) -> [f64; 4] {
    [u[0] * v[0], u[0] * v[1], u[1] * v[0], u[1] * v[1]]
}

/// |⟨left ⊗ right|ψ⟩|^2 by explicit enumeration.
pub fn brute_joint(psi: &PairState, left: &str, right: &str) -> f64 {
    let bra = kron(single(left), single(right));
    let amp: Complex64 = bra.iter().zip(psi.amps.iter()).map(|(b, c)| c * *b).sum();
    amp.norm_sqr()
}

/// Six-term CH combination, variant first, from brute-force joints.
pub fn brute_b_first(psi: &PairState) -> f64 {
    let p = |a, b| brute_joint(psi, a, b);
    -p("K0bar", "K0bar") + p("KS", "K0bar") + p("K0bar", "KL") + p("KS", "KL")
        - (p("KS", "K0") + p("KS", "K0bar"))
        - (p("K0", "KL") + p("K0bar", "KL"))
}

/// Second variant written out term by term (no beam swapping).
pub fn brute_b_second(psi: &PairState) -> f64 {
    let p = |a, b| brute_joint(psi, a, b);
    -p("K0bar", "K0bar") + p("K0bar", "KS") + p("KL", "K0bar") + p("KL", "KS")
        - (p("K0", "KS") + p("K0bar", "KS"))
        - (p("KL", "K0") + p("KL", "K0bar"))
}

pub fn closed_form(big_r: Complex64) -> PairState {
    let n = 1.0 / (2.0 + big_r.norm_sqr()).sqrt();
    PairState::new([
        Complex64::new(0.0, 0.0),
        Complex64::new(n, 0.0),
        Complex64::new(-n, 0.0),
        big_r * n,
    ])
}

/// Detector parameters for the response oracle.
#[derive(Clone, Copy)]
pub struct Det {
    /// P(decay inside window | K_S).
    pub ks_decays: f64,
    /// P(survive window | K_L).
    pub kl_survives: f64,
    pub eta_k0bar: f64,
    pub eta_k0: f64,
}

impl Det {
    pub fn new(delta_t: f64, gamma_l: f64, eta_k0bar: f64, eta_k0: f64) -> Self {
        Self {
            ks_decays: 1.0 - (-delta_t).exp(),
            kl_survives: (-gamma_l * delta_t).exp(),
            eta_k0bar,
            eta_k0,
        }
    }

    /// (true outcome, P(recorded | true)) contributions to `recorded`.
    fn sources(&self, recorded: &'static str) -> Vec<(&'static str, f64)> {
        match recorded {
            "KS" => vec![("KS", self.ks_decays), ("KL", 1.0 - self.kl_survives)],
            "KL" => vec![("KS", 1.0 - self.ks_decays), ("KL", self.kl_survives)],
            "K0" => vec![("K0", self.eta_k0)],
            "K0bar" => vec![("K0bar", self.eta_k0bar)],
            other => panic!("{other}"),
        }
    }

    fn eta(&self, o: &str) -> f64 {
        match o {
            "K0" => self.eta_k0,
            "K0bar" => self.eta_k0bar,
            _ => 1.0,
        }
    }

    /// Expected recorded probability, optionally efficiency corrected.
    pub fn recorded(
        &self,
        psi: &PairState,
        a: &'static str,
        b: &'static str,
        corrected: bool,
    ) -> f64 {
        let mut total = 0.0;
        for (ta, wa) in self.sources(a) {
            for (tb, wb) in self.sources(b) {
                total += wa * wb * brute_joint(psi, ta, tb);
            }
        }
        if corrected {
            total / (self.eta(a) * self.eta(b))
        } else {
            total
        }
    }

    pub fn b_first(&self, psi: &PairState, corrected: bool) -> f64 {
        let p = |a, b| self.recorded(psi, a, b, corrected);
        -p("K0bar", "K0bar") + p("KS", "K0bar") + p("K0bar", "KL") + p("KS", "KL")
            - (p("KS", "K0") + p("KS", "K0bar"))
            - (p("K0", "KL") + p("K0bar", "KL"))
    }
}

/// Deterministic pseudo-random numbers in [0, 1) for test inputs (SplitMix64).
pub struct TestRng(pub u64);

impl TestRng {
    pub fn next_f64(&mut self) -> f64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Random complex R with |R| <= max_abs, uniform over the disc.
    pub fn complex_in_disc(&mut self, max_abs: f64) -> Complex64 {
        let r = max_abs * self.next_f64().sqrt();
        Complex64::from_polar(r, self.range(-std::f64::consts::PI, std::f64::consts::PI))
    }

    pub fn unit_pair_state(&mut self) -> PairState {
        let mut amps = [Complex64::new(0.0, 0.0); 4];
        for a in amps.iter_mut() {
            *a = Complex64::new(self.range(-1.0, 1.0), self.range(-1.0, 1.0));
        }
        let n: f64 = amps.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        PairState::new(amps.map(|c| c / n))
    }

    pub fn unit_single(&mut self) -> kaon_bell::quasispin::SingleKaonState {
        let a = Complex64::new(self.range(-1.0, 1.0), self.range(-1.0, 1.0));
        let b = Complex64::new(self.range(-1.0, 1.0), self.range(-1.0, 1.0));
        let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
        kaon_bell::quasispin::SingleKaonState::new(a / n, b / n)
    }
}
