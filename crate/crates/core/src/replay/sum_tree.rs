//! Array-backed binary sum tree with a parallel max tree.
//!
//! Leaves live at `size..2*size`; node `i` holds the sum of `2i` and `2i+1`.
//! Parents are recomputed from their children on every write rather than
//! patched with a delta, so rounding never accumulates across updates.

#[derive(Debug, Clone)]
pub struct SumTree {
    size: usize,
    capacity: usize,
    sum: Vec<f64>,
    max: Vec<f64>,
}

impl SumTree {
    pub fn new(capacity: usize) -> Self {
        let size = capacity.max(1).next_power_of_two();
        Self {
            size,
            capacity,
            sum: vec![0.0; 2 * size],
            max: vec![0.0; 2 * size],
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn total(&self) -> f64 {
        self.sum[1]
    }

    /// Largest leaf value, 0 when every leaf is empty.
    pub fn max_leaf(&self) -> f64 {
        self.max[1]
    }

    pub fn get(&self, index: usize) -> f64 {
        self.sum[self.size + index]
    }

    pub fn set(&mut self, index: usize, value: f64) {
        assert!(index < self.capacity, "leaf {index} out of range");
        debug_assert!(value >= 0.0 && value.is_finite());
        let mut node = self.size + index;
        self.sum[node] = value;
        self.max[node] = value;
        while node > 1 {
            node /= 2;
            let (l, r) = (2 * node, 2 * node + 1);
            self.sum[node] = self.sum[l] + self.sum[r];
            self.max[node] = self.max[l].max(self.max[r]);
        }
    }

    /// Leaf whose cumulative range contains `mass`.
    ///
    /// Out-of-range masses are clamped, and a descent never enters an empty
    /// subtree, so the result always has a strictly positive value whenever
    /// the total is positive.
    pub fn find(&self, mass: f64) -> usize {
        let mut mass = mass.clamp(0.0, self.total());
        let mut node = 1;
        while node < self.size {
            let (l, r) = (2 * node, 2 * node + 1);
            if (mass < self.sum[l] || self.sum[r] <= 0.0) && self.sum[l] > 0.0 {
                node = l;
            } else {
                mass = (mass - self.sum[l]).max(0.0);
                node = r;
            }
        }
        node - self.size
    }

    /// Leaf values in index order.
    pub fn leaves(&self) -> &[f64] {
        &self.sum[self.size..self.size + self.capacity]
    }
}
