//! Randomized property suite for the Householder kernel.
//!
//! Used by the `test-props` command and by the test suites. Every check is
//! run over `trials` random instances and reports the worst error seen.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::householder::{
    apply_rotation_chain, decompose_rotation, dot, invert_projection_chain,
    invert_rotation_chain, materialize_projection, materialize_rotation, norm, project, reflect,
    ProjectionChain, ProjectionEntry, ReflectionChain, SquareMatrix, UnitVector,
};

pub fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    (0..k).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn random_unit<R: Rng + ?Sized>(rng: &mut R, k: usize) -> UnitVector {
    loop {
        if let Ok(u) = UnitVector::new(gaussian_vec(rng, k)) {
            return u;
        }
    }
}

/// A chain of `len` Gaussian reflection vectors.
pub fn random_chain<R: Rng + ?Sized>(rng: &mut R, k: usize, len: usize) -> ReflectionChain {
    let vectors = (0..len).map(|_| random_unit(rng, k)).collect();
    ReflectionChain::new(k, vectors).expect("consistent dimensions")
}

/// A projection chain with Gaussian axes and `tau` uniform in `[-3, 3]`,
/// keeping `|tau - 1| >= 1e-3`.
pub fn random_projection_chain<R: Rng + ?Sized>(rng: &mut R, k: usize, len: usize) -> ProjectionChain {
    let taus = Uniform::new_inclusive(-3.0, 3.0).expect("valid range");
    let entries = (0..len)
        .map(|_| {
            let tau = loop {
                let t: f64 = taus.sample(rng);
                if (t - 1.0).abs() >= 1e-3 {
                    break t;
                }
            };
            ProjectionEntry { axis: random_unit(rng, k), tau }
        })
        .collect();
    ProjectionChain::new(k, entries).expect("consistent dimensions")
}

/// Gaussian matrix orthonormalized column by column (Gram-Schmidt, two
/// passes), with the first column negated if needed so that `det = +1`.
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R, k: usize) -> SquareMatrix {
    loop {
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(k);
        let mut ok = true;
        for _ in 0..k {
            let mut v = gaussian_vec(rng, k);
            for _ in 0..2 {
                for c in &cols {
                    let proj = dot(&v, c);
                    v.iter_mut().zip(c).for_each(|(vi, ci)| *vi -= proj * ci);
                }
            }
            let n = norm(&v);
            if n < 1e-6 {
                ok = false;
                break;
            }
            v.iter_mut().for_each(|vi| *vi /= n);
            cols.push(v);
        }
        if !ok {
            continue;
        }
        let mut m = SquareMatrix::identity(k);
        for (j, c) in cols.iter().enumerate() {
            for (i, v) in c.iter().enumerate() {
                m.set(i, j, *v);
            }
        }
        if m.determinant() < 0.0 {
            for i in 0..k {
                m.set(i, 0, -m.get(i, 0));
            }
        }
        return m;
    }
}

/// A rotation with `R^2 = I`: reflections about mutually orthogonal vectors.
pub fn random_involution_chain<R: Rng + ?Sized>(rng: &mut R, k: usize, len: usize) -> ReflectionChain {
    assert!(len <= k, "at most k mutually orthogonal directions");
    let basis = random_rotation(rng, k);
    let vectors = (0..len)
        .map(|j| UnitVector::new(basis.column(j)).expect("unit column"))
        .collect();
    ReflectionChain::new(k, vectors).expect("consistent dimensions")
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyOutcome {
    pub name: &'static str,
    pub trials: usize,
    pub max_error: f64,
    pub tolerance: f64,
}

impl PropertyOutcome {
    pub fn passed(&self) -> bool {
        self.max_error.is_finite() && self.max_error <= self.tolerance
    }
}

impl std::fmt::Display for PropertyOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}\t{}\ttrials={}\tmax_error={:.3e}\ttol={:.0e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.trials,
            self.max_error,
            self.tolerance
        )
    }
}

struct Tracker {
    name: &'static str,
    trials: usize,
    tolerance: f64,
    max_error: f64,
}

impl Tracker {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self { name, trials: 0, tolerance, max_error: 0.0 }
    }

    fn record(&mut self, err: f64) {
        self.trials += 1;
        // NaN must not be swallowed by max
        self.max_error = if err.is_nan() { f64::NAN } else { self.max_error.max(err) };
    }

    fn finish(self) -> PropertyOutcome {
        PropertyOutcome {
            name: self.name,
            trials: self.trials,
            max_error: self.max_error,
            tolerance: self.tolerance,
        }
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Runs every kernel property for dimension `k` (k >= 2).
pub fn run_property_suite(k: usize, trials: usize, seed: u64) -> Vec<PropertyOutcome> {
    assert!(k >= 2, "rotation dimension must be at least 2");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = 2 * (k / 2);

    let mut norm_pres = Tracker::new("norm preservation", 1e-10);
    let mut orth = Tracker::new("orthogonality", 1e-9);
    let mut det = Tracker::new("determinant +1", 1e-9);
    let mut path = Tracker::new("path equivalence", 1e-10);
    let mut round_trip = Tracker::new("decomposition round trip", 1e-8);
    let mut proj_inv = Tracker::new("projection inverse", 1e-9);
    let mut involution = Tracker::new("reflection involution", 1e-12);
    let mut law = Tracker::new("projection distance law", 1e-9);
    let mut symmetry = Tracker::new("symmetry (R^2 = I)", 1e-10);
    let mut inversion = Tracker::new("inversion", 1e-10);
    let mut composition = Tracker::new("composition", 1e-8);

    for _ in 0..trials {
        let chain = random_chain(&mut rng, k, len);
        let x = gaussian_vec(&mut rng, k);
        let y = apply_rotation_chain(&chain, &x).expect("dims");
        norm_pres.record((norm(&y) - norm(&x)).abs() / norm(&x).max(f64::MIN_POSITIVE));

        let q = materialize_rotation(&chain).expect("even chain");
        orth.record(q.orthogonality_error());
        det.record((q.determinant() - 1.0).abs());
        path.record(max_abs_diff(&q.mul_vec(&x).expect("dims"), &y));

        let target = random_rotation(&mut rng, k);
        let err = match decompose_rotation(&target) {
            Ok(c) if c.len() == len => {
                materialize_rotation(&c).expect("even chain").frobenius_distance(&target)
            }
            _ => f64::INFINITY,
        };
        round_trip.record(err);

        let m = rng.random_range(1..=4);
        let pchain = random_projection_chain(&mut rng, k, m);
        let err = match invert_projection_chain(&pchain) {
            Ok(inv) => {
                let a = materialize_projection(&pchain).expect("dims");
                let b = materialize_projection(&inv).expect("dims");
                a.matmul(&b).expect("dims").max_abs_distance(&SquareMatrix::identity(k))
            }
            Err(_) => f64::INFINITY,
        };
        proj_inv.record(err);

        let u = random_unit(&mut rng, k);
        let twice = reflect(&u, &reflect(&u, &x).expect("dims")).expect("dims");
        involution.record(max_abs_diff(&twice, &x));

        let (a, b) = (gaussian_vec(&mut rng, k), gaussian_vec(&mut rng, k));
        let p = random_unit(&mut rng, k);
        let tau: f64 = rng.random_range(-3.0..3.0);
        law.record(distance_law_error(&p, tau, &a, &b));

        let inv_chain = random_involution_chain(&mut rng, k, len);
        let r = materialize_rotation(&inv_chain).expect("even chain");
        let (h, t) = (gaussian_vec(&mut rng, k), gaussian_vec(&mut rng, k));
        let rh_t: Vec<f64> = r.mul_vec(&h).expect("dims").iter().zip(&t).map(|(a, b)| a - b).collect();
        let rt_h: Vec<f64> = r.mul_vec(&t).expect("dims").iter().zip(&h).map(|(a, b)| a - b).collect();
        symmetry.record((norm(&rh_t) - norm(&rt_h)).abs());

        let back = apply_rotation_chain(&invert_rotation_chain(&chain), &y).expect("dims");
        inversion.record(max_abs_diff(&back, &x));

        let other = random_chain(&mut rng, k, len);
        let product = materialize_rotation(&other)
            .expect("even chain")
            .matmul(&q)
            .expect("dims");
        let err = match decompose_rotation(&product) {
            Ok(c) => materialize_rotation(&c).expect("even chain").frobenius_distance(&product),
            Err(_) => f64::INFINITY,
        };
        composition.record(err);
    }

    vec![
        norm_pres.finish(),
        orth.finish(),
        det.finish(),
        path.finish(),
        round_trip.finish(),
        proj_inv.finish(),
        involution.finish(),
        law.finish(),
        symmetry.finish(),
        inversion.finish(),
        composition.finish(),
    ]
}

/// Absolute gap between the projected squared distance and
/// `s^2 + (tau^2 - 2 tau) s^2 cos^2(theta)`, scaled by `max(1, s^2)`.
pub fn distance_law_error(p: &UnitVector, tau: f64, a: &[f64], b: &[f64]) -> f64 {
    let pa = project(p, tau, a).expect("dims");
    let pb = project(p, tau, b).expect("dims");
    let projected: f64 = pa.iter().zip(&pb).map(|(x, y)| (x - y) * (x - y)).sum();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let s2 = dot(&diff, &diff);
    let unit = p.normalized();
    let cos2 = if s2 > 0.0 { dot(&diff, &unit).powi(2) / s2 } else { 0.0 };
    let predicted = s2 + (tau * tau - 2.0 * tau) * s2 * cos2;
    (projected - predicted).abs() / s2.max(1.0)
}
