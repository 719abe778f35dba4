//! Seeded synthetic datasets with known labels, used by tests, examples and
//! the benchmark harness.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset_io::{read_csv, DataMatrix, GroundTruth, LoadOptions};
use crate::rng::seeded;

/// Points with the generating component of every row.
#[derive(Debug, Clone)]
pub struct Blobs {
    pub points: Array2<f64>,
    pub labels: Vec<usize>,
    pub centers: Array2<f64>,
}

impl Blobs {
    pub fn to_matrix(&self) -> DataMatrix {
        let rows: Vec<Vec<f64>> = self.points.outer_iter().map(|r| r.to_vec()).collect();
        DataMatrix::from_numeric(&rows).expect("finite blob data")
    }

    pub fn truth(&self) -> GroundTruth {
        GroundTruth::new(self.labels.iter().map(|l| l.to_string()).collect())
    }
}

fn sample(centers: Array2<f64>, n: usize, sigma: f64, rng: &mut impl Rng) -> Blobs {
    let (k, d) = centers.dim();
    let noise = Normal::new(0.0, sigma).expect("sigma must be finite and non-negative");
    let mut points = Array2::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        // Sizes differ by at most one: the first n mod k blobs get the extra row.
        let c = component_of(i, n, k);
        labels.push(c);
        for j in 0..d {
            points[[i, j]] = centers[[c, j]] + noise.sample(rng);
        }
    }
    Blobs {
        points,
        labels,
        centers,
    }
}

fn component_of(i: usize, n: usize, k: usize) -> usize {
    let base = n / k;
    let extra = n % k;
    let big = (base + 1) * extra;
    if i < big {
        i / (base + 1)
    } else {
        extra + (i - big) / base.max(1)
    }
}

/// `k` isotropic Gaussian blobs in `d` dimensions. Centres are drawn
/// uniformly in a cube of side `1.5·separation·k^(1/d)·σ` and rejected until
/// every pair is at least `separation·σ` apart.
pub fn gaussian_blobs(k: usize, d: usize, n: usize, sigma: f64, separation: f64, seed: u64) -> Blobs {
    let mut rng = seeded(seed);
    let side = 1.5 * separation * sigma * (k as f64).powf(1.0 / d as f64);
    let min_gap = separation * sigma;
    let centers = loop {
        let c = Array2::from_shape_fn((k, d), |_| rng.random::<f64>() * side);
        let ok = (0..k).all(|a| {
            (a + 1..k).all(|b| {
                let gap: f64 = (0..d).map(|j| (c[[a, j]] - c[[b, j]]).powi(2)).sum::<f64>().sqrt();
                gap >= min_gap
            })
        });
        if ok {
            break c;
        }
    };
    sample(centers, n, sigma, &mut rng)
}

/// Three blobs at the corners of an equilateral triangle with the given side.
pub fn triangle_blobs(n: usize, sigma: f64, side: f64, seed: u64) -> Blobs {
    let h = side * 3f64.sqrt() / 2.0;
    let centers = ndarray::array![[0.0, 0.0], [side, 0.0], [side / 2.0, h]];
    sample(centers, n, sigma, &mut seeded(seed))
}

/// A 345×7 mixed-type table shaped like the liver-disorders data: five
/// integer blood-test columns, a real-valued drinks column and a categorical
/// column, with two classes of 145 and 200 rows.
pub fn liver_like(seed: u64) -> (DataMatrix, GroundTruth) {
    let mut rng = seeded(seed);
    let n = 345;
    let first = 145;
    let mut text = String::from("mcv,alkphos,sgpt,sgot,gammagt,drinks,site\n");
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = usize::from(i >= first);
        let shift = class as f64;
        let g = |rng: &mut crate::rng::SeededRng, mean: f64, sd: f64| {
            Normal::new(mean, sd).unwrap().sample(rng)
        };
        let mcv = g(&mut rng, 86.0 + 8.0 * shift, 1.5).round();
        let alk = g(&mut rng, 60.0 + 40.0 * shift, 6.0).round();
        let sgpt = g(&mut rng, 20.0 + 30.0 * shift, 4.0).round();
        let sgot = g(&mut rng, 18.0 + 20.0 * shift, 3.0).round();
        let ggt = g(&mut rng, 25.0 + 60.0 * shift, 8.0).round();
        let drinks = (g(&mut rng, 2.0 + 8.0 * shift, 1.0)).max(0.0);
        let site = if rng.random::<f64>() < 0.85 - 0.7 * shift { "urban" } else { "rural" };
        text.push_str(&format!(
            "{mcv},{alk},{sgpt},{sgot},{ggt},{drinks:.3},{site}\n"
        ));
        labels.push((class + 1).to_string());
    }
    let m = read_csv(text.as_bytes(), &LoadOptions::default()).expect("generated table parses");
    (m, GroundTruth::new(labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset_io::{summarize, AttributeKind};

    #[test]
    fn blob_sizes_are_balanced() {
        let b = gaussian_blobs(3, 2, 10, 1.0, 6.0, 1);
        let counts: Vec<usize> = (0..3).map(|c| b.labels.iter().filter(|&&l| l == c).count()).collect();
        assert_eq!(counts, vec![4, 3, 3]);
    }

    #[test]
    fn centres_respect_separation() {
        let b = gaussian_blobs(6, 5, 60, 1.0, 6.0, 3);
        for a in 0..6 {
            for c in a + 1..6 {
                let gap: f64 = (0..5)
                    .map(|j| (b.centers[[a, j]] - b.centers[[c, j]]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                assert!(gap >= 6.0);
            }
        }
    }

    #[test]
    fn liver_shape() {
        let (m, t) = liver_like(1);
        let s = summarize(&m, Some(&t));
        assert_eq!((s.instances, s.attributes, s.missing), (345, 7, false));
        assert_eq!(s.classes, Some(2));
        assert_eq!(m.schema.columns[0].kind, AttributeKind::Integer);
        assert_eq!(m.schema.columns[5].kind, AttributeKind::Real);
        assert_eq!(m.schema.columns[6].kind, AttributeKind::Categorical);
    }
}
