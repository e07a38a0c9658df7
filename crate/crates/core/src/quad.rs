//! Adaptive Gauss–Kronrod quadrature.
//!
//! Globally adaptive bisection with the 21-point Kronrod rule (10-point Gauss
//! embedded), the same scheme as QUADPACK's `qag`. Integration can start from
//! several breakpoints, and semi-infinite ranges are mapped onto `(0, 1]`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_060,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_130,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_459,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_208_318_415,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];

// Gauss weights for XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

/// Tolerances for one adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_subdivisions: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-10,
            rel: 1e-8,
            max_subdivisions: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resk = fc * WGK[10];
    let mut resg = 0.0;
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = resk * 0.5;
    let mut resasc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = resk * half;
    let resabs = resabs * half.abs();
    let resasc = resasc * half.abs();
    let mut error = ((resk - resg) * half).abs();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * (200.0 * error / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * resabs);
    }
    Segment { a, b, value, error }
}

/// Integrate `f` over the union of consecutive intervals given by `points`
/// (sorted, at least two entries).
pub fn integrate_points<F: FnMut(f64) -> f64>(
    mut f: F,
    points: &[f64],
    tol: Tolerance,
) -> Result<Estimate> {
    assert!(points.len() >= 2, "need at least one interval");
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    for w in points.windows(2) {
        if w[1] > w[0] {
            heap.push(kronrod(&mut f, w[0], w[1]));
            evaluations += 21;
        }
    }
    let total = |h: &BinaryHeap<Segment>| {
        h.iter()
            .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error))
    };
    let mut subdivisions = heap.len();
    loop {
        let (value, error) = total(&heap);
        if error <= tol.abs.max(tol.rel * value.abs()) {
            return Ok(Estimate {
                value,
                error,
                evaluations,
            });
        }
        if subdivisions >= tol.max_subdivisions {
            return Err(Error::QuadratureFailure {
                value,
                error,
                subdivisions,
            });
        }
        let worst = match heap.pop() {
            Some(s) => s,
            None => {
                return Ok(Estimate {
                    value: 0.0,
                    error: 0.0,
                    evaluations,
                })
            }
        };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval cannot be split further in double precision.
            heap.push(Segment { error: 0.0, ..worst });
            let (value, error) = total(&heap);
            if error <= tol.abs.max(tol.rel * value.abs()) {
                continue;
            }
            return Err(Error::QuadratureFailure {
                value,
                error,
                subdivisions,
            });
        }
        heap.push(kronrod(&mut f, worst.a, mid));
        heap.push(kronrod(&mut f, mid, worst.b));
        evaluations += 42;
        subdivisions += 1;
    }
}

/// Integrate `f` over `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate> {
    integrate_points(f, &[a, b], tol)
}

/// Integrate `f` over `[a, ∞)` with `a > 0` using `x = a/s`.
pub fn integrate_tail<F: FnMut(f64) -> f64>(mut f: F, a: f64, tol: Tolerance) -> Result<Estimate> {
    assert!(a > 0.0, "tail start must be positive");
    integrate(
        |s: f64| {
            if s <= 0.0 {
                0.0
            } else {
                let x = a / s;
                f(x) * a / (s * s)
            }
        },
        0.0,
        1.0,
        tol,
    )
}
