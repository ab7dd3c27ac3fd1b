//! Canonical enumeration of body-point triplets.

use alloc::vec::Vec;

use crate::body::BodyModel;

/// One unordered triplet of joints, `i < j < k`, with its lexicographic rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TripletId {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub ordinal: usize,
}

impl TripletId {
    pub fn joints(&self) -> [usize; 3] {
        [self.i, self.j, self.k]
    }

    pub fn contains(&self, joint: usize) -> bool {
        self.i == joint || self.j == joint || self.k == joint
    }

    /// Builds the id of `{i, j, k}` (any order) in an `n`-joint model.
    pub fn from_joints(mut joints: [usize; 3], n: usize) -> Option<Self> {
        joints.sort_unstable();
        let [i, j, k] = joints;
        if i == j || j == k || k >= n {
            return None;
        }
        Some(Self {
            i,
            j,
            k,
            ordinal: ordinal_of(i, j, k, n),
        })
    }

    pub fn from_ordinal(ordinal: usize, n: usize) -> Option<Self> {
        if n < 3 || ordinal >= choose3(n) {
            return None;
        }
        let mut rest = ordinal;
        let mut i = 0;
        loop {
            let block = choose2(n - 1 - i);
            if rest < block {
                break;
            }
            rest -= block;
            i += 1;
        }
        let mut j = i + 1;
        loop {
            let block = n - 1 - j;
            if rest < block {
                break;
            }
            rest -= block;
            j += 1;
        }
        let k = j + 1 + rest;
        Some(Self { i, j, k, ordinal })
    }
}

fn choose2(m: usize) -> usize {
    if m < 2 {
        0
    } else {
        m * (m - 1) / 2
    }
}

pub(crate) fn choose3(n: usize) -> usize {
    if n < 3 {
        0
    } else {
        n * (n - 1) * (n - 2) / 6
    }
}

fn ordinal_of(i: usize, j: usize, k: usize, n: usize) -> usize {
    let before_i: usize = (0..i).map(|a| choose2(n - 1 - a)).sum();
    let before_j: usize = (i + 1..j).map(|b| n - 1 - b).sum();
    before_i + before_j + (k - j - 1)
}

/// All `C(n, 3)` triplets of the model in lexicographic order.
pub fn enumerate_triplets(model: &BodyModel) -> Vec<TripletId> {
    enumerate_for(model.joint_count())
}

pub(crate) fn enumerate_for(n: usize) -> Vec<TripletId> {
    let mut out = Vec::with_capacity(choose3(n));
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                out.push(TripletId {
                    i,
                    j,
                    k,
                    ordinal: out.len(),
                });
            }
        }
    }
    out
}
