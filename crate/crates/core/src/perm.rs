//! Permutations of the four vertices of a tetrahedron.

use std::fmt;

/// A permutation of `{0, 1, 2, 3}` stored as its image list.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Perm4([u8; 4]);

impl Perm4 {
    pub const IDENTITY: Perm4 = Perm4([0, 1, 2, 3]);

    /// Builds a permutation from an image list, returning `None` unless the
    /// list is a bijection of `{0, 1, 2, 3}`.
    pub fn new(images: [u8; 4]) -> Option<Perm4> {
        let mut seen = [false; 4];
        for &x in &images {
            if x > 3 || seen[x as usize] {
                return None;
            }
            seen[x as usize] = true;
        }
        Some(Perm4(images))
    }

    pub fn images(self) -> [u8; 4] {
        self.0
    }

    #[inline]
    pub fn apply(self, i: usize) -> usize {
        self.0[i] as usize
    }

    pub fn inverse(self) -> Perm4 {
        let mut inv = [0u8; 4];
        for (i, &x) in self.0.iter().enumerate() {
            inv[x as usize] = i as u8;
        }
        Perm4(inv)
    }

    /// `self.compose(other)` maps `i` to `self(other(i))`.
    pub fn compose(self, other: Perm4) -> Perm4 {
        let mut out = [0u8; 4];
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = self.0[other.0[i] as usize];
        }
        Perm4(out)
    }

    /// +1 for even permutations, -1 for odd ones.
    pub fn sign(self) -> i8 {
        let mut inversions = 0;
        for i in 0..4 {
            for j in i + 1..4 {
                if self.0[i] > self.0[j] {
                    inversions += 1;
                }
            }
        }
        if inversions % 2 == 0 {
            1
        } else {
            -1
        }
    }

    /// Position of this permutation in the lexicographic order of all 24.
    pub fn index(self) -> usize {
        let mut idx = 0;
        let factor = [6, 2, 1, 1];
        let mut used = [false; 4];
        for (pos, &x) in self.0.iter().enumerate() {
            let smaller = (0..x).filter(|&y| !used[y as usize]).count();
            idx += smaller * factor[pos];
            used[x as usize] = true;
        }
        idx
    }

    pub fn from_index(mut idx: usize) -> Option<Perm4> {
        if idx >= 24 {
            return None;
        }
        let factor = [6, 2, 1, 1];
        let mut avail: Vec<u8> = vec![0, 1, 2, 3];
        let mut out = [0u8; 4];
        for pos in 0..4 {
            let k = idx / factor[pos];
            idx %= factor[pos];
            out[pos] = avail.remove(k);
        }
        Some(Perm4(out))
    }

    pub fn all() -> impl Iterator<Item = Perm4> {
        (0..24).map(|i| Perm4::from_index(i).unwrap())
    }

    /// The transposition swapping `a` and `b`.
    pub fn transposition(a: usize, b: usize) -> Perm4 {
        let mut out = [0u8, 1, 2, 3];
        out.swap(a, b);
        Perm4(out)
    }
}

impl fmt::Debug for Perm4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}{}", self.0[0], self.0[1], self.0[2], self.0[3])
    }
}

/// Vertex pairs of the six edges of a tetrahedron, in index order.
pub const EDGE_VERTICES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Index (0..6) of the tetrahedron edge joining vertices `a` and `b`.
pub fn edge_index(a: usize, b: usize) -> usize {
    let (a, b) = if a < b { (a, b) } else { (b, a) };
    match (a, b) {
        (0, 1) => 0,
        (0, 2) => 1,
        (0, 3) => 2,
        (1, 2) => 3,
        (1, 3) => 4,
        (2, 3) => 5,
        _ => panic!("not a tetrahedron edge: {a}{b}"),
    }
}

/// Index of the edge opposite `e`.
pub fn opposite_edge(e: usize) -> usize {
    5 - e
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_roundtrip_covers_all() {
        let mut seen = [false; 24];
        for p in Perm4::all() {
            assert_eq!(Perm4::from_index(p.index()), Some(p));
            seen[p.index()] = true;
        }
        assert!(seen.iter().all(|&s| s));
        assert_eq!(Perm4::IDENTITY.index(), 0);
    }

    #[test]
    fn compose_inverse_sign() {
        for p in Perm4::all() {
            assert_eq!(p.compose(p.inverse()), Perm4::IDENTITY);
            for q in Perm4::all() {
                assert_eq!(p.compose(q).sign(), p.sign() * q.sign());
            }
        }
        assert_eq!(Perm4::transposition(2, 3).sign(), -1);
    }

    #[test]
    fn opposite_edges_are_disjoint() {
        for (e, &(a, b)) in EDGE_VERTICES.iter().enumerate() {
            let (c, d) = EDGE_VERTICES[opposite_edge(e)];
            assert!(a != c && a != d && b != c && b != d);
            assert_eq!(edge_index(b, a), e);
        }
    }
}
