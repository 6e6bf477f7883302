//! Adaptive Gauss-Kronrod integration of complex-valued functions over the
//! real line and over the plane.
//!
//! Infinite ranges are mapped onto `(0, 1]` with `x = (1 - t) / t`; for the
//! whole line both branches `x` and `-x` are folded into one integrand, the
//! same way QUADPACK's `qagi` does it. The transformed integrand is then
//! integrated by bisection driven by the 15-point Kronrod error estimate.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};
use std::sync::atomic::{AtomicUsize, Ordering};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// 7-point Gauss weights, living on the odd Kronrod nodes `XGK[1], XGK[3], ...`.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Tolerances and limits for the adaptive integrators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Maximum number of subintervals kept by one adaptive run.
    pub max_subdivisions: usize,
    /// Relative tolerance of the inner integrals of a nested double integral.
    pub inner_rel_tol: f64,
    /// Integrate only the upper half plane and return `2 Re` of it. The caller
    /// asserts `f(-x, -y) = conj(f(x, y))`.
    pub use_conjugate_symmetry: bool,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            max_subdivisions: 2000,
            inner_rel_tol: 1e-9,
            use_conjugate_symmetry: true,
        }
    }
}

impl QuadConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidConfig(format!("rel_tol must be > 0, got {}", self.rel_tol)));
        }
        if !(self.abs_tol >= 0.0) {
            return Err(Error::InvalidConfig(format!("abs_tol must be >= 0, got {}", self.abs_tol)));
        }
        if self.abs_tol <= 0.0 && self.rel_tol < 50.0 * f64::EPSILON {
            return Err(Error::InvalidConfig(format!(
                "rel_tol {} is below roundoff (50 eps) and abs_tol is 0",
                self.rel_tol
            )));
        }
        if self.max_subdivisions < 1 {
            return Err(Error::InvalidConfig("max_subdivisions must be >= 1".into()));
        }
        if !(self.inner_rel_tol > 0.0 && self.inner_rel_tol <= self.rel_tol) {
            return Err(Error::InvalidConfig(format!(
                "inner_rel_tol must lie in (0, rel_tol], got {}",
                self.inner_rel_tol
            )));
        }
        Ok(())
    }

    /// Same configuration with both relative tolerances scaled to `rel_tol`.
    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        let ratio = self.inner_rel_tol / self.rel_tol;
        self.rel_tol = rel_tol;
        self.inner_rel_tol = rel_tol * ratio.min(1.0);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: Complex64,
    /// Absolute error estimate.
    pub error_estimate: f64,
    pub evaluations: usize,
}

/// Values the adaptive driver can integrate.
trait QuadValue:
    Copy + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn zero() -> Self;
    /// The complex number being integrated.
    fn main(&self) -> Complex64;
    /// Same value with the integrated number replaced by an extrapolated one.
    fn with_main(self, v: Complex64) -> Self;
    fn norm(&self) -> f64 {
        self.main().norm()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn main(&self) -> Complex64 {
        *self
    }
    fn with_main(self, v: Complex64) -> Self {
        v
    }
}

/// An inner-integral value that drags its own error estimate through the
/// outer rule. Only `value` drives the outer error estimate.
#[derive(Debug, Clone, Copy)]
struct Tracked {
    value: Complex64,
    inner_error: f64,
}

impl Add for Tracked {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Tracked {
            value: self.value + rhs.value,
            inner_error: self.inner_error + rhs.inner_error,
        }
    }
}

impl Sub for Tracked {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Tracked {
            value: self.value - rhs.value,
            inner_error: self.inner_error + rhs.inner_error,
        }
    }
}

impl Mul<f64> for Tracked {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        Tracked {
            value: self.value * rhs,
            inner_error: self.inner_error * rhs.abs(),
        }
    }
}

impl QuadValue for Tracked {
    fn zero() -> Self {
        Tracked {
            value: Complex64::new(0.0, 0.0),
            inner_error: 0.0,
        }
    }
    fn main(&self) -> Complex64 {
        self.value
    }
    fn with_main(self, v: Complex64) -> Self {
        Tracked { value: v, ..self }
    }
}

/// One application of the 15-point rule.
#[derive(Debug, Clone, Copy)]
struct Rule<V> {
    value: V,
    error: f64,
    /// `∫ |f|`.
    resabs: f64,
    /// `∫ |f - mean f|`.
    resasc: f64,
}

fn gauss_kronrod<V, F>(f: &F, a: f64, b: f64, parallel: bool) -> Rule<V>
where
    V: QuadValue,
    F: Fn(f64) -> V + Sync,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    // Node k in 0..7 sits at center - half*XGK[k], node 7 at the center,
    // node 8+k at center + half*XGK[k].
    let abscissa = |i: usize| -> f64 {
        match i {
            0..=6 => center - half * XGK[i],
            7 => center,
            _ => center + half * XGK[i - 8],
        }
    };
    let values: Vec<V> = if parallel {
        (0..15).into_par_iter().map(|i| f(abscissa(i))).collect()
    } else {
        (0..15).map(|i| f(abscissa(i))).collect()
    };

    let fc = values[7];
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs_sum = fc.norm() * WGK[7];
    for k in 0..7 {
        let (lo, hi) = (values[k], values[8 + k]);
        kronrod = kronrod + (lo + hi) * WGK[k];
        abs_sum += WGK[k] * (lo.norm() + hi.norm());
        if k % 2 == 1 {
            gauss = gauss + (lo + hi) * WG[k / 2];
        }
    }

    let mean = kronrod * 0.5;
    let mut asc = WGK[7] * (fc - mean).norm();
    for k in 0..7 {
        asc += WGK[k] * ((values[k] - mean).norm() + (values[8 + k] - mean).norm());
    }

    let scale = half.abs();
    let value = kronrod * half;
    let resabs = abs_sum * scale;
    let resasc = asc * scale;
    let mut error = ((kronrod - gauss) * half).norm();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * (200.0 * error / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * resabs);
    }

    Rule {
        value,
        error,
        resabs,
        resasc,
    }
}

struct Adaptive<V> {
    value: V,
    error: f64,
    evaluations: usize,
    subdivisions: usize,
    converged: bool,
}

#[derive(Debug, Clone, Copy)]
struct Interval<V> {
    a: f64,
    b: f64,
    value: V,
    error: f64,
    level: usize,
}

/// Subintervals ordered by decreasing error, with the bookkeeping the
/// extrapolation needs to tell small intervals from large ones.
struct Workspace<V> {
    intervals: Vec<Interval<V>>,
    order: Vec<usize>,
    nrmax: usize,
    current: usize,
    maximum_level: usize,
    limit: usize,
}

impl<V: QuadValue> Workspace<V> {
    fn new(a: f64, b: f64, first: &Rule<V>, limit: usize) -> Self {
        Self {
            intervals: vec![Interval {
                a,
                b,
                value: first.value,
                error: first.error,
                level: 0,
            }],
            order: vec![0],
            nrmax: 0,
            current: 0,
            maximum_level: 0,
            limit,
        }
    }

    fn retrieve(&self) -> Interval<V> {
        self.intervals[self.current]
    }

    fn update(&mut self, left: (f64, f64, &Rule<V>), right: (f64, f64, &Rule<V>)) {
        let level = self.intervals[self.current].level + 1;
        let make = |(a, b, r): (f64, f64, &Rule<V>)| Interval {
            a,
            b,
            value: r.value,
            error: r.error,
            level,
        };
        let (keep, append) = if right.2.error > left.2.error { (right, left) } else { (left, right) };
        self.intervals[self.current] = make(keep);
        self.intervals.push(make(append));
        self.maximum_level = self.maximum_level.max(level);
        self.sort();
    }

    fn sort(&mut self) {
        let intervals = &self.intervals;
        self.order = (0..intervals.len()).collect();
        self.order
            .sort_by(|&i, &j| intervals[j].error.total_cmp(&intervals[i].error).then(i.cmp(&j)));
        self.nrmax = self.nrmax.min(self.order.len() - 1);
        self.current = self.order[self.nrmax];
    }

    fn large_interval(&self) -> bool {
        self.intervals[self.current].level < self.maximum_level
    }

    fn increase_nrmax(&mut self) -> bool {
        let last = self.intervals.len() - 1;
        let upper = if last > 1 + self.limit / 2 {
            (self.limit + 1).saturating_sub(last)
        } else {
            last
        };
        for _ in self.nrmax..=upper {
            if self.nrmax >= self.order.len() {
                return false;
            }
            self.current = self.order[self.nrmax];
            if self.intervals[self.current].level < self.maximum_level {
                return true;
            }
            self.nrmax += 1;
        }
        false
    }

    fn reset_nrmax(&mut self) {
        self.nrmax = 0;
        self.current = self.order[0];
    }

    /// Sum in left-to-right order so the result does not depend on the
    /// refinement history.
    fn sum(&self) -> V {
        let mut sorted: Vec<&Interval<V>> = self.intervals.iter().collect();
        sorted.sort_by(|x, y| x.a.total_cmp(&y.a));
        sorted.iter().fold(V::zero(), |acc, s| acc + s.value)
    }
}

/// `1 / z` without overflow for huge `|z|` (Smith's algorithm).
fn recip(z: Complex64) -> Complex64 {
    if z.re.abs() >= z.im.abs() {
        let r = z.im / z.re;
        let d = z.re + z.im * r;
        Complex64::new(1.0 / d, -r / d)
    } else {
        let r = z.re / z.im;
        let d = z.re * r + z.im;
        Complex64::new(r / d, -1.0 / d)
    }
}

const TABLE_SIZE: usize = 52;

/// Wynn's epsilon algorithm on the sequence of partial results.
struct EpsilonTable {
    entries: [Complex64; TABLE_SIZE],
    n: usize,
    last_three: [Complex64; 3],
    calls: usize,
}

impl EpsilonTable {
    fn new() -> Self {
        Self {
            entries: [Complex64::new(0.0, 0.0); TABLE_SIZE],
            n: 0,
            last_three: [Complex64::new(0.0, 0.0); 3],
            calls: 0,
        }
    }

    fn append(&mut self, y: Complex64) {
        if self.n < TABLE_SIZE {
            self.entries[self.n] = y;
            self.n += 1;
        }
    }

    /// Extrapolated limit and its error estimate.
    fn extrapolate(&mut self) -> (Complex64, f64) {
        let eps = f64::EPSILON;
        let huge = Complex64::new(f64::MAX, 0.0);
        let tab = &mut self.entries;
        let n = self.n - 1;
        let current = tab[n];
        if n < 2 {
            return (current, (5.0 * eps * current.norm()).max(f64::MAX));
        }

        let mut result = current;
        let mut abserr = f64::MAX;
        let newelm = n / 2;
        let mut n_final = n;
        tab[n + 2] = tab[n];
        tab[n] = huge;

        for i in 0..newelm {
            let mut res = tab[n - 2 * i + 2];
            let e0 = tab[n - 2 * i - 2];
            let e1 = tab[n - 2 * i - 1];
            let e2 = res;

            let delta2 = e2 - e1;
            let err2 = delta2.norm();
            let tol2 = e2.norm().max(e1.norm()) * eps;
            let delta3 = e1 - e0;
            let err3 = delta3.norm();
            let tol3 = e1.norm().max(e0.norm()) * eps;

            if err2 <= tol2 && err3 <= tol3 {
                // e0, e1 and e2 agree to machine accuracy.
                let abserr = (err2 + err3).max(5.0 * eps * res.norm());
                return (res, abserr);
            }

            let e3 = tab[n - 2 * i];
            tab[n - 2 * i] = e1;
            let delta1 = e1 - e3;
            let err1 = delta1.norm();
            let tol1 = e1.norm().max(e3.norm()) * eps;

            if err1 <= tol1 || err2 <= tol2 || err3 <= tol3 {
                n_final = 2 * i;
                break;
            }

            let ss = recip(delta1) + recip(delta2) - recip(delta3);
            if (ss * e1).norm() <= 1e-4 {
                n_final = 2 * i;
                break;
            }

            res = e1 + recip(ss);
            tab[n - 2 * i] = res;
            let error = err2 + (res - e2).norm() + err3;
            if error <= abserr {
                abserr = error;
                result = res;
            }
        }

        let limexp = 50 - 1;
        if n_final == limexp {
            n_final = 2 * (limexp / 2);
        }
        if n % 2 == 1 {
            for i in 0..=newelm {
                tab[1 + i * 2] = tab[i * 2 + 3];
            }
        } else {
            for i in 0..=newelm {
                tab[i * 2] = tab[i * 2 + 2];
            }
        }
        if n != n_final {
            for i in 0..=n_final {
                tab[i] = tab[n - n_final + i];
            }
        }
        self.n = n_final + 1;

        if self.calls < 3 {
            self.last_three[self.calls] = result;
            abserr = f64::MAX;
        } else {
            let l = &mut self.last_three;
            abserr = (result - l[2]).norm() + (result - l[1]).norm() + (result - l[0]).norm();
            l[0] = l[1];
            l[1] = l[2];
            l[2] = result;
        }
        self.calls += 1;
        (result, abserr.max(5.0 * eps * result.norm()))
    }
}

fn interval_too_small(a1: f64, a2: f64, b2: f64) -> bool {
    let tmp = (1.0 + 100.0 * f64::EPSILON) * (a2.abs() + 1000.0 * f64::MIN_POSITIVE);
    a1.abs() <= tmp && b2.abs() <= tmp
}

/// Adaptive bisection with epsilon-algorithm extrapolation, following
/// QUADPACK's `qags` step for step (including its failure modes).
fn adapt<V, F>(f: &F, a: f64, b: f64, rel_tol: f64, abs_tol: f64, limit: usize, parallel: bool) -> Adaptive<V>
where
    V: QuadValue,
    F: Fn(f64) -> V + Sync,
{
    let first = gauss_kronrod(f, a, b, parallel);
    let mut evaluations = 15;
    let mut ws = Workspace::new(a, b, &first, limit);
    let done = |ws: &Workspace<V>, value: V, error: f64, evaluations: usize, converged: bool| Adaptive {
        value,
        error,
        evaluations,
        subdivisions: ws.intervals.len(),
        converged,
    };

    let mut tolerance = abs_tol.max(rel_tol * first.value.norm());
    if first.error <= 100.0 * f64::EPSILON * first.resabs && first.error > tolerance {
        return done(&ws, first.value, first.error, evaluations, false);
    }
    if (first.error <= tolerance && first.error != first.resasc) || first.error == 0.0 {
        return done(&ws, first.value, first.error, evaluations, true);
    }
    if limit == 1 {
        return done(&ws, first.value, first.error, evaluations, false);
    }

    let mut table = EpsilonTable::new();
    table.append(first.value.main());

    let mut area = first.value;
    let mut errsum = first.error;
    let mut res_ext = first.value.main();
    let mut err_ext = f64::MAX;
    let positive = first.value.norm() >= (1.0 - 50.0 * f64::EPSILON) * first.resabs;

    let mut ertest = 0.0;
    let mut error_over_large = 0.0;
    let mut correc = 0.0;
    let mut ktmin = 0usize;
    let (mut roundoff1, mut roundoff2, mut roundoff3) = (0usize, 0usize, 0usize);
    let mut error_type = 0u8;
    let mut error_type2 = false;
    let mut extrapolating = false;
    let mut disallow_extrapolation = false;
    let mut iteration = 1usize;

    // Whether to report the plain interval sum instead of the extrapolation.
    let plain_sum: bool;
    loop {
        let worst = ws.retrieve();
        let current_level = worst.level + 1;
        let mid = 0.5 * (worst.a + worst.b);
        iteration += 1;

        let left = gauss_kronrod(f, worst.a, mid, parallel);
        let right = gauss_kronrod(f, mid, worst.b, parallel);
        evaluations += 30;

        let area12 = left.value + right.value;
        let error12 = left.error + right.error;
        errsum = errsum + error12 - worst.error;
        area = area + area12 - worst.value;
        tolerance = abs_tol.max(rel_tol * area.norm());

        if left.resasc != left.error && right.resasc != right.error {
            let delta = (worst.value - area12).norm();
            if delta <= 1e-5 * area12.norm() && error12 >= 0.99 * worst.error {
                if extrapolating {
                    roundoff2 += 1;
                } else {
                    roundoff1 += 1;
                }
            }
            if iteration > 10 && error12 > worst.error {
                roundoff3 += 1;
            }
        }
        if roundoff1 + roundoff2 >= 10 || roundoff3 >= 20 {
            error_type = 2;
        }
        if roundoff2 >= 5 {
            error_type2 = true;
        }
        if interval_too_small(worst.a, mid, worst.b) {
            error_type = 4;
        }

        ws.update((worst.a, mid, &left), (mid, worst.b, &right));

        if errsum <= tolerance {
            return done(&ws, ws.sum(), errsum, evaluations, error_type == 0);
        }
        if error_type != 0 {
            break;
        }
        if iteration >= limit.saturating_sub(1) {
            error_type = 1;
            break;
        }
        if iteration == 2 {
            error_over_large = errsum;
            ertest = tolerance;
            table.append(area.main());
            continue;
        }
        if disallow_extrapolation {
            continue;
        }

        error_over_large -= worst.error;
        if current_level < ws.maximum_level {
            error_over_large += error12;
        }

        if !extrapolating {
            // Keep bisecting large intervals until the smallest one is next.
            if ws.large_interval() {
                continue;
            }
            extrapolating = true;
            ws.nrmax = 1;
        }

        if !error_type2 && error_over_large > ertest && ws.increase_nrmax() {
            continue;
        }

        table.append(area.main());
        let (reseps, abseps) = table.extrapolate();
        ktmin += 1;
        if ktmin > 5 && err_ext < 0.001 * errsum {
            error_type = 5;
        }
        if abseps < err_ext {
            ktmin = 0;
            err_ext = abseps;
            res_ext = reseps;
            correc = error_over_large;
            ertest = abs_tol.max(rel_tol * reseps.norm());
            if err_ext <= ertest {
                break;
            }
        }
        if table.n == 1 {
            disallow_extrapolation = true;
        }
        if error_type == 5 {
            break;
        }
        ws.reset_nrmax();
        extrapolating = false;
        error_over_large = errsum;
    }

    if err_ext == f64::MAX {
        plain_sum = true;
    } else if error_type != 0 || error_type2 {
        if error_type2 {
            err_ext += correc;
        }
        if error_type == 0 {
            error_type = 3;
        }
        let area_norm = area.norm();
        if res_ext.norm() != 0.0 && area_norm != 0.0 {
            plain_sum = err_ext / res_ext.norm() > errsum / area_norm;
        } else { plain_sum = err_ext > errsum; }
    } else {
        plain_sum = false;
    }

    if plain_sum {
        return done(&ws, ws.sum(), errsum, evaluations, error_type == 0);
    }

    // Divergence tests on the extrapolated value.
    let max_area = res_ext.norm().max(area.norm());
    if !(!positive && max_area < 0.01 * first.resabs) {
        let ratio = res_ext.norm() / area.norm();
        let aligned = (res_ext * area.main().conj()).re >= 0.0;
        if !aligned || !(0.01..=100.0).contains(&ratio) || errsum > area.norm() {
            error_type = 6;
        }
    }
    done(&ws, ws.sum().with_main(res_ext), err_ext, evaluations, error_type == 0)
}

fn whole_line<V, F>(f: F) -> impl Fn(f64) -> V + Sync
where
    V: QuadValue,
    F: Fn(f64) -> V + Sync,
{
    move |t: f64| {
        let x = (1.0 - t) / t;
        (f(x) + f(-x)) * (1.0 / (t * t))
    }
}

fn half_line<V, F>(f: F) -> impl Fn(f64) -> V + Sync
where
    V: QuadValue,
    F: Fn(f64) -> V + Sync,
{
    move |t: f64| {
        let x = (1.0 - t) / t;
        f(x) * (1.0 / (t * t))
    }
}

fn finish(run: Adaptive<Complex64>) -> Result<QuadResult> {
    if run.converged {
        Ok(QuadResult {
            value: run.value,
            error_estimate: run.error,
            evaluations: run.evaluations,
        })
    } else {
        Err(Error::NonConvergence {
            value_re: run.value.re,
            value_im: run.value.im,
            error_estimate: run.error,
            subdivisions: run.subdivisions,
        })
    }
}

/// `∫_{-∞}^{∞} f(x) dx` for an absolutely integrable complex function.
pub fn integrate_line<F>(f: F, cfg: &QuadConfig) -> Result<QuadResult>
where
    F: Fn(f64) -> Complex64 + Sync,
{
    cfg.validate()?;
    let g = whole_line(f);
    finish(adapt(&g, 0.0, 1.0, cfg.rel_tol, cfg.abs_tol, cfg.max_subdivisions, false))
}

/// Half-periods of the oscillating tail integrated before giving up.
const MAX_TAIL_CELLS: usize = 50;

/// `∫_{-∞}^{∞} f(x) dx` for an integrand whose tails oscillate like
/// `e^{±iωx}` and decay slowly. The tails are integrated half-period by
/// half-period and the partial sums extrapolated with the epsilon algorithm,
/// which the `x = (1-t)/t` map of [`integrate_line`] cannot do for it.
pub fn integrate_line_oscillatory<F>(f: F, omega: f64, cfg: &QuadConfig) -> Result<QuadResult>
where
    F: Fn(f64) -> Complex64 + Sync,
{
    cfg.validate()?;
    let omega = omega.abs();
    if !(omega > 1e-6 && omega.is_finite()) {
        return integrate_line(f, cfg);
    }
    let cell = PI / omega;
    let edge = cell * (CENTRAL_HALF_WIDTH / cell).ceil();
    let limit = cfg.max_subdivisions;
    let central = adapt(&f, -edge, edge, cfg.rel_tol, cfg.abs_tol, limit, false);
    let mut evaluations = central.evaluations;
    let mut subdivisions = central.subdivisions;
    let mut cells_error = central.error;
    let mut cells_ok = central.converged;

    let pair = |x: f64| f(x) + f(-x);
    let mut table = EpsilonTable::new();
    let mut partial = central.value;
    let mut best = (partial, f64::MAX);
    for k in 0..MAX_TAIL_CELLS {
        let a = edge + k as f64 * cell;
        let run = adapt(&pair, a, a + cell, cfg.rel_tol, cfg.abs_tol, limit, false);
        evaluations += run.evaluations;
        subdivisions += run.subdivisions;
        cells_error += run.error;
        cells_ok &= run.converged;
        partial += run.value;
        table.append(partial);
        if k < 2 {
            continue;
        }
        let (value, error) = table.extrapolate();
        if error < best.1 {
            best = (value, error);
        }
        if best.1 + cells_error <= cfg.abs_tol.max(cfg.rel_tol * best.0.norm()) {
            break;
        }
    }
    let (value, error) = (best.0, best.1 + cells_error);
    let converged = cells_ok && error <= cfg.abs_tol.max(cfg.rel_tol * value.norm());
    finish(Adaptive {
        value,
        error,
        evaluations,
        subdivisions,
        converged,
    })
}

/// Half-width of the non-oscillatory core before the tails are cut into cells.
const CENTRAL_HALF_WIDTH: f64 = 20.0;

/// `∫_0^∞ f(x) dx`.
pub fn integrate_half_line<F>(f: F, cfg: &QuadConfig) -> Result<QuadResult>
where
    F: Fn(f64) -> Complex64 + Sync,
{
    cfg.validate()?;
    let g = half_line(f);
    finish(adapt(&g, 0.0, 1.0, cfg.rel_tol, cfg.abs_tol, cfg.max_subdivisions, false))
}

/// `∫_a^b f(x) dx` over a finite interval.
pub fn integrate_finite<F>(f: F, a: f64, b: f64, cfg: &QuadConfig) -> Result<QuadResult>
where
    F: Fn(f64) -> Complex64 + Sync,
{
    cfg.validate()?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidConfig(format!("finite interval expected, got [{a}, {b}]")));
    }
    if a == b {
        return Ok(QuadResult {
            value: Complex64::new(0.0, 0.0),
            error_estimate: 0.0,
            evaluations: 0,
        });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut out = finish(adapt(&f, lo, hi, cfg.rel_tol, cfg.abs_tol, cfg.max_subdivisions, false))?;
    out.value *= sign;
    Ok(out)
}

/// `∬ f2(x, y) dx dy` over the plane by nested adaptive integration.
///
/// With `cfg.use_conjugate_symmetry` the caller asserts
/// `f2(-x, -y) = conj(f2(x, y))`; only `y >= 0` is integrated and the
/// returned value is real. The identity is spot-checked first.
pub fn integrate_double<F>(f2: F, cfg: &QuadConfig) -> Result<QuadResult>
where
    F: Fn(f64, f64) -> Complex64 + Sync,
{
    integrate_nested(|y| y, |_| None, |&y, x| f2(x, y), cfg)
}

/// Inner integral over the whole line when, besides `x = 0`, the integrand
/// may peak at `x = ridge`. A single `x = (1-t)/t` map puts a distant peak
/// into a sliver near `t = 0` that the first Kronrod pass can miss entirely,
/// so the line is cut at both peaks and each piece is anchored at one.
fn inner_line<F>(f: F, ridge: Option<f64>, rel_tol: f64, abs_tol: f64, limit: usize) -> Adaptive<Complex64>
where
    F: Fn(f64) -> Complex64 + Sync,
{
    let ridge = match ridge {
        Some(r) if r.abs() > 1.0 => r,
        _ => return adapt(&whole_line(f), 0.0, 1.0, rel_tol, abs_tol, limit, false),
    };
    let (lo, hi) = if ridge < 0.0 { (ridge, 0.0) } else { (0.0, ridge) };
    let abs_tol = abs_tol / 3.0;
    let pieces = [
        adapt(&half_line(|x: f64| f(lo - x)), 0.0, 1.0, rel_tol, abs_tol, limit, false),
        adapt(&f, lo, hi, rel_tol, abs_tol, limit, false),
        adapt(&half_line(|x: f64| f(hi + x)), 0.0, 1.0, rel_tol, abs_tol, limit, false),
    ];
    let value: Complex64 = pieces.iter().map(|p| p.value).sum();
    let error: f64 = pieces.iter().map(|p| p.error).sum();
    Adaptive {
        value,
        error,
        evaluations: pieces.iter().map(|p| p.evaluations).sum(),
        subdivisions: pieces.iter().map(|p| p.subdivisions).sum(),
        // pieces may fail to reach a relative tolerance set by a tiny piece
        converged: pieces.iter().all(|p| p.converged) || error <= (3.0 * abs_tol).max(rel_tol * value.norm()),
    }
}

/// Nested double integral where `prepare(y)` caches whatever the inner
/// integrand needs at a fixed outer coordinate `y`, and `ridge(y)` names a
/// second inner peak besides `x = 0`, if there is one.
pub fn integrate_nested<P, Prep, Rg, F>(prepare: Prep, ridge: Rg, f: F, cfg: &QuadConfig) -> Result<QuadResult>
where
    P: Sync,
    Prep: Fn(f64) -> P + Sync,
    Rg: Fn(f64) -> Option<f64> + Sync,
    F: Fn(&P, f64) -> Complex64 + Sync,
{
    cfg.validate()?;
    if cfg.use_conjugate_symmetry {
        check_conjugate_symmetry(&prepare, &f)?;
    }

    let inner_failures = AtomicUsize::new(0);
    let inner_evaluations = AtomicUsize::new(0);
    let outer = |y: f64| -> Tracked {
        let state = prepare(y);
        let run = inner_line(
            |x: f64| f(&state, x),
            ridge(y),
            cfg.inner_rel_tol,
            cfg.abs_tol,
            cfg.max_subdivisions,
        );
        if !run.converged {
            inner_failures.fetch_add(1, Ordering::Relaxed);
        }
        inner_evaluations.fetch_add(run.evaluations, Ordering::Relaxed);
        Tracked {
            value: run.value,
            inner_error: run.error,
        }
    };

    let run = if cfg.use_conjugate_symmetry {
        adapt(
            &half_line(outer),
            0.0,
            1.0,
            cfg.rel_tol,
            cfg.abs_tol,
            cfg.max_subdivisions,
            true,
        )
    } else {
        adapt(
            &whole_line(outer),
            0.0,
            1.0,
            cfg.rel_tol,
            cfg.abs_tol,
            cfg.max_subdivisions,
            true,
        )
    };

    let (value, error) = if cfg.use_conjugate_symmetry {
        (
            Complex64::new(2.0 * run.value.value.re, 0.0),
            2.0 * (run.error + run.value.inner_error),
        )
    } else {
        (run.value.value, run.error + run.value.inner_error)
    };

    let tolerance = cfg.abs_tol.max(cfg.rel_tol * value.norm());
    let inner_ok = inner_failures.load(Ordering::Relaxed) == 0 || error <= tolerance;
    if !run.converged || !inner_ok {
        return Err(Error::NonConvergence {
            value_re: value.re,
            value_im: value.im,
            error_estimate: error,
            subdivisions: run.subdivisions,
        });
    }
    Ok(QuadResult {
        value,
        error_estimate: error,
        evaluations: inner_evaluations.load(Ordering::Relaxed),
    })
}

const SYMMETRY_PROBES: [(f64, f64); 5] = [(0.3, 0.7), (-1.3, 2.1), (5.0, -0.4), (0.0, 1.7), (12.5, 3.25)];

fn check_conjugate_symmetry<P, Prep, F>(prepare: &Prep, f: &F) -> Result<()>
where
    Prep: Fn(f64) -> P,
    F: Fn(&P, f64) -> Complex64,
{
    for &(x, y) in &SYMMETRY_PROBES {
        let here = f(&prepare(y), x);
        let mirrored = f(&prepare(-y), -x);
        let scale = here.norm().max(mirrored.norm());
        if scale < 1e-300 {
            continue;
        }
        let deviation = (mirrored - here.conj()).norm() / scale;
        if !(deviation <= 1e-8) {
            return Err(Error::SymmetryViolation { x, y, deviation });
        }
    }
    Ok(())
}
