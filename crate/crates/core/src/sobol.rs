//! Digitally shifted Sobol sequence for the initial design.
//!
//! Direction numbers cover 21 dimensions; any extra dimension falls back to
//! uniform pseudo-random coordinates from the same seeded stream.

use alloc::vec::Vec;

use crate::rng::RngState;
use crate::space::SearchSpace;

const BITS: usize = 32;

/// (degree, polynomial coefficient, initial direction numbers) for dimensions 2..=21.
const DIRECTIONS: [(u32, u32, &[u32]); 20] = [
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
    (5, 4, &[1, 1, 5, 5, 5]),
    (5, 7, &[1, 1, 7, 11, 19]),
    (5, 11, &[1, 1, 5, 1, 1]),
    (5, 13, &[1, 1, 1, 3, 11]),
    (5, 14, &[1, 3, 5, 5, 31]),
    (6, 1, &[1, 3, 3, 9, 7, 49]),
    (6, 13, &[1, 1, 1, 15, 21, 21]),
    (6, 16, &[1, 3, 1, 13, 27, 49]),
    (6, 19, &[1, 1, 1, 15, 7, 5]),
    (6, 22, &[1, 3, 1, 15, 13, 25]),
    (6, 25, &[1, 1, 5, 5, 19, 61]),
    (7, 1, &[1, 3, 7, 11, 23, 15, 103]),
    (7, 4, &[1, 3, 7, 13, 13, 15, 69]),
];

pub const MAX_SOBOL_DIM: usize = DIRECTIONS.len() + 1;

fn direction_vectors(dim_index: usize) -> [u32; BITS] {
    let mut v = [0u32; BITS];
    if dim_index == 0 {
        for (k, vk) in v.iter_mut().enumerate() {
            *vk = 1 << (BITS - 1 - k);
        }
        return v;
    }
    let (s, a, m) = DIRECTIONS[dim_index - 1];
    let s = s as usize;
    for k in 0..s.min(BITS) {
        v[k] = m[k] << (BITS - 1 - k);
    }
    for k in s..BITS {
        let mut next = v[k - s] ^ (v[k - s] >> s);
        for i in 1..s {
            if (a >> (s - 1 - i)) & 1 == 1 {
                next ^= v[k - i];
            }
        }
        v[k] = next;
    }
    v
}

/// Gray-code Sobol generator over the unit cube with a random digital shift.
#[derive(Debug, Clone)]
pub struct Sobol {
    directions: Vec<[u32; BITS]>,
    shift: Vec<u32>,
    state: Vec<u32>,
    index: u64,
    extra_dims: usize,
    rng: RngState,
}

impl Sobol {
    pub fn new(dim: usize, rng: &mut RngState) -> Self {
        let sobol_dims = dim.min(MAX_SOBOL_DIM);
        let directions = (0..sobol_dims).map(direction_vectors).collect();
        let shift = (0..sobol_dims).map(|_| rng.next_u32()).collect();
        Self {
            directions,
            shift,
            state: alloc::vec![0; sobol_dims],
            index: 0,
            extra_dims: dim - sobol_dims,
            rng: rng.fork(),
        }
    }

    /// Next point, strictly inside (0, 1)^d.
    pub fn next_unit(&mut self) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .state
            .iter()
            .zip(&self.shift)
            .map(|(&x, &s)| (x ^ s) as f64 / 4_294_967_296.0 + 0.5 / 4_294_967_296.0)
            .collect();
        for _ in 0..self.extra_dims {
            out.push(self.rng.uniform().max(f64::MIN_POSITIVE));
        }
        let c = (!self.index).trailing_zeros() as usize;
        if c < BITS {
            for (x, v) in self.state.iter_mut().zip(&self.directions) {
                *x ^= v[c];
            }
        }
        self.index += 1;
        out
    }
}

/// `n` Sobol points mapped affinely into `space`.
pub fn sobol_init(space: &SearchSpace, n: usize, rng: &mut RngState) -> Vec<Vec<f64>> {
    let mut seq = Sobol::new(space.dim(), rng);
    (0..n).map(|_| space.denormalize(&seq.next_unit())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_design() {
        let s = SearchSpace::unit(3).unwrap();
        assert!(sobol_init(&s, 0, &mut RngState::new(1)).is_empty());
    }

    #[test]
    fn seven_dims_fourteen_points_in_bounds() {
        let bounds: Vec<(f64, f64)> = (0..7).map(|j| (-(j as f64) - 1.0, j as f64 + 2.0)).collect();
        let s = SearchSpace::new(&bounds).unwrap();
        let pts = sobol_init(&s, 14, &mut RngState::new(5));
        assert_eq!(pts.len(), 14);
        for p in &pts {
            for (j, &x) in p.iter().enumerate() {
                assert!(x > s.lower()[j] && x < s.upper()[j]);
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let s = SearchSpace::new(&[(-5.0, 10.0), (0.0, 15.0)]).unwrap();
        let a = sobol_init(&s, 32, &mut RngState::new(11));
        let b = sobol_init(&s, 32, &mut RngState::new(11));
        assert_eq!(a, b);
        let c = sobol_init(&s, 32, &mut RngState::new(12));
        assert_ne!(a, c);
    }

    #[test]
    fn unshifted_prefix_is_stratified() {
        // Every 2^k-point prefix puts exactly one point in each dyadic interval per axis.
        for dim_index in 0..MAX_SOBOL_DIM {
            let v = direction_vectors(dim_index);
            let mut x = 0u32;
            let mut seen = [false; 16];
            for i in 0u64..16 {
                seen[(x >> 28) as usize] = true;
                x ^= v[(!i).trailing_zeros() as usize];
            }
            assert!(seen.iter().all(|&b| b), "dimension {dim_index}");
        }
    }

    #[test]
    fn high_dimensional_fallback_in_bounds() {
        let s = SearchSpace::unit(30).unwrap();
        let pts = sobol_init(&s, 8, &mut RngState::new(2));
        assert!(pts.iter().all(|p| p.len() == 30 && p.iter().all(|&x| x > 0.0 && x < 1.0)));
    }
}
