use crate::error::{Error, Result};

/// A permutation of `0..n` with a cycle index for O(1) powers.
#[derive(Debug, Clone)]
pub struct Perm {
    images: Vec<u32>,
    cycle_of: Vec<u32>,
    pos: Vec<u32>,
    cycles: Vec<Vec<u32>>,
}

impl PartialEq for Perm {
    fn eq(&self, other: &Self) -> bool {
        self.images == other.images
    }
}
impl Eq for Perm {}

impl std::hash::Hash for Perm {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.images.hash(state)
    }
}

impl Perm {
    /// Builds a permutation from its image array. On failure returns the
    /// first index whose image is out of range or repeated.
    pub fn from_images(images: Vec<u32>) -> std::result::Result<Perm, usize> {
        let n = images.len();
        let mut seen = vec![false; n];
        for (i, &x) in images.iter().enumerate() {
            let x = x as usize;
            if x >= n || seen[x] {
                return Err(i);
            }
            seen[x] = true;
        }
        Ok(Self::index(images))
    }

    pub fn from_usize(images: &[usize]) -> Result<Perm> {
        let v: Vec<u32> = images.iter().map(|&x| x as u32).collect();
        Perm::from_images(v).map_err(|i| Error::InvalidParameter(format!("not a bijection at index {i}")))
    }

    fn index(images: Vec<u32>) -> Perm {
        let n = images.len();
        let mut cycle_of = vec![u32::MAX; n];
        let mut pos = vec![0u32; n];
        let mut cycles = Vec::new();
        for start in 0..n {
            if cycle_of[start] != u32::MAX {
                continue;
            }
            let id = cycles.len() as u32;
            let mut cyc = Vec::new();
            let mut x = start;
            loop {
                cycle_of[x] = id;
                pos[x] = cyc.len() as u32;
                cyc.push(x as u32);
                x = images[x] as usize;
                if x == start {
                    break;
                }
            }
            cycles.push(cyc);
        }
        Perm { images, cycle_of, pos, cycles }
    }

    pub fn identity(n: usize) -> Perm {
        Self::index((0..n as u32).collect())
    }

    /// `i ↦ i + shift (mod n)`.
    pub fn rotation(n: usize, shift: usize) -> Perm {
        Self::index((0..n).map(|i| ((i + shift) % n) as u32).collect())
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> &[u32] {
        &self.images
    }

    #[inline]
    pub fn apply(&self, i: usize) -> usize {
        self.images[i] as usize
    }

    /// Applies the permutation `e` times (negative `e` applies the inverse).
    #[inline]
    pub fn pow_apply(&self, i: usize, e: i64) -> usize {
        let cyc = &self.cycles[self.cycle_of[i] as usize];
        let len = cyc.len() as i64;
        let p = (self.pos[i] as i64 + e).rem_euclid(len);
        cyc[p as usize] as usize
    }

    pub fn inverse(&self) -> Perm {
        let mut inv = vec![0u32; self.len()];
        for (i, &x) in self.images.iter().enumerate() {
            inv[x as usize] = i as u32;
        }
        Self::index(inv)
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Perm) -> Perm {
        assert_eq!(self.len(), other.len());
        Self::index(other.images.iter().map(|&x| self.images[x as usize]).collect())
    }

    pub fn pow(&self, e: i64) -> Perm {
        Self::index((0..self.len()).map(|i| self.pow_apply(i, e) as u32).collect())
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &x)| i == x as usize)
    }

    pub fn cycles(&self) -> &[Vec<u32>] {
        &self.cycles
    }

    /// Order of the permutation (lcm of cycle lengths); `None` on overflow.
    pub fn order(&self) -> Option<u64> {
        let mut acc: u64 = 1;
        for c in &self.cycles {
            let l = c.len() as u64;
            acc = acc.checked_mul(l / gcd(acc, l))?;
        }
        Some(acc)
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}
