use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{nullspace_reduce, GeometryError, HPolyhedron};
use crate::lp::LpSolver;

pub const BURN_IN_STEPS: usize = 50;
pub const THINNING_STEPS: usize = 10;

const DIRECTION_EPS: f64 = 1e-12;

/// Hit-and-run chain over a bounded, nonempty polyhedron, started at the
/// Chebyshev center. Equalities hidden as opposing row pairs are eliminated
/// first so that lower-dimensional sets are sampled in their own affine hull.
#[derive(Debug, Clone)]
pub struct HitAndRun {
    base: HPolyhedron,
    map: DMatrix<f64>,
    offset: DVector<f64>,
    current: DVector<f64>,
    burned_in: bool,
}

impl HitAndRun {
    pub fn new(p: &HPolyhedron, solver: &LpSolver) -> Result<Self, GeometryError> {
        let split = p.split_equalities()?;
        let reduced = nullspace_reduce(
            split.inequalities.a(),
            split.inequalities.b(),
            &split.eq_matrix,
            &split.eq_rhs,
        )?;
        let base = reduced.base().clone();
        let ball = base.chebyshev_center(solver)?;
        if ball.radius.is_infinite() || !base.is_bounded(solver)? {
            return Err(GeometryError::Unbounded);
        }
        Ok(Self {
            base,
            map: reduced.map().clone(),
            offset: reduced.offset().clone(),
            current: ball.center,
            burned_in: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.map.nrows()
    }

    fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let k = self.base.dim();
        if k == 0 {
            return;
        }
        let mut dir = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = dir.norm();
        if norm == 0.0 {
            return;
        }
        dir /= norm;
        let a = self.base.a();
        let b = self.base.b();
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..a.nrows() {
            let ad = a.row(i).transpose().dot(&dir);
            let slack = (b[i] - a.row(i).transpose().dot(&self.current)).max(0.0);
            if ad > DIRECTION_EPS {
                hi = hi.min(slack / ad);
            } else if ad < -DIRECTION_EPS {
                lo = lo.max(slack / ad);
            }
        }
        if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
            return;
        }
        let t = rng.random_range(lo..=hi);
        self.current += dir * t;
    }

    /// Next sample: burn-in on the first call, then thinning steps.
    pub fn next_sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> DVector<f64> {
        if !self.burned_in {
            for _ in 0..BURN_IN_STEPS {
                self.step(rng);
            }
            self.burned_in = true;
        }
        for _ in 0..THINNING_STEPS {
            self.step(rng);
        }
        &self.map * &self.current + &self.offset
    }
}

/// One approximately uniform sample from a bounded, nonempty polyhedron.
pub fn sample_interior<R: Rng + ?Sized>(
    p: &HPolyhedron,
    rng: &mut R,
    solver: &LpSolver,
) -> Result<DVector<f64>, GeometryError> {
    Ok(HitAndRun::new(p, solver)?.next_sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unit_box_samples_inside_with_uniform_mean() {
        let solver = LpSolver::default();
        let p = HPolyhedron::from_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let mut chain = HitAndRun::new(&p, &solver).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut mean = DVector::zeros(2);
        let count = 10_000;
        for _ in 0..count {
            let x = chain.next_sample(&mut rng);
            assert!(p.contains(&x, 1e-9).unwrap());
            mean += x;
        }
        mean /= count as f64;
        assert!((&mean - DVector::from_vec(vec![0.5, 0.5])).amax() < 0.05, "{mean}");
    }

    #[test]
    fn same_seed_same_sequence() {
        let solver = LpSolver::default();
        let p = HPolyhedron::from_box(&[0.0, -1.0], &[2.0, 1.0]).unwrap();
        let run = |seed| {
            let mut chain = HitAndRun::new(&p, &solver).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..20).map(|_| chain.next_sample(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(run(11), run(11));
        assert_ne!(run(11), run(12));
    }

    #[test]
    fn flat_set_is_sampled_in_its_hull() {
        let solver = LpSolver::default();
        // x + y = 1 inside the unit square, written as two inequalities
        let p = HPolyhedron::from_box(&[0.0, 0.0], &[1.0, 1.0])
            .unwrap()
            .with_equalities(&DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), &DVector::from_vec(vec![1.0]))
            .unwrap();
        let mut chain = HitAndRun::new(&p, &solver).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let xs: Vec<f64> = (0..200).map(|_| chain.next_sample(&mut rng)[0]).collect();
        let spread = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - xs.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread > 0.5, "samples should move along the segment");
    }

    #[test]
    fn empty_and_unbounded_are_rejected() {
        let solver = LpSolver::default();
        let empty = HPolyhedron::from_rows(&[vec![1.0], vec![-1.0]], &[0.0, -1.0]).unwrap();
        assert!(matches!(HitAndRun::new(&empty, &solver), Err(GeometryError::Empty)));
        let half = HPolyhedron::from_rows(&[vec![1.0]], &[0.0]).unwrap();
        assert!(matches!(HitAndRun::new(&half, &solver), Err(GeometryError::Unbounded)));
    }
}
