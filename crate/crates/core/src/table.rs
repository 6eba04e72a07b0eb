use crate::scalar::Real;
use std::collections::BTreeMap;

/// Tables with at most this many entries are stored densely.
pub const DENSE_LIMIT: u64 = 1 << 20;

/// Non-negative weights indexed by coloring index. Zero entries are never reported.
#[derive(Debug, Clone, PartialEq)]
pub enum Table<T> {
    Dense(Vec<T>),
    Sparse { size: u64, map: BTreeMap<u64, T> },
}

impl<T: Real> Table<T> {
    pub fn zeros(size: u64) -> Self {
        if size <= DENSE_LIMIT {
            Table::Dense(vec![T::zero(); size as usize])
        } else {
            Table::Sparse { size, map: BTreeMap::new() }
        }
    }

    pub fn from_entries(size: u64, entries: impl IntoIterator<Item = (u64, T)>) -> Self {
        let mut t = Self::zeros(size);
        for (i, v) in entries {
            t.add(i, v);
        }
        t
    }

    pub fn size(&self) -> u64 {
        match self {
            Table::Dense(v) => v.len() as u64,
            Table::Sparse { size, .. } => *size,
        }
    }

    pub fn is_dense(&self) -> bool {
        matches!(self, Table::Dense(_))
    }

    pub fn get(&self, i: u64) -> T {
        match self {
            Table::Dense(v) => v[i as usize],
            Table::Sparse { map, .. } => map.get(&i).copied().unwrap_or_else(T::zero),
        }
    }

    pub fn add(&mut self, i: u64, x: T) {
        assert!(i < self.size(), "table index out of range");
        match self {
            Table::Dense(v) => v[i as usize] += x,
            Table::Sparse { map, .. } => {
                let e = map.entry(i).or_insert_with(T::zero);
                *e += x;
                if *e == T::zero() {
                    map.remove(&i);
                }
            }
        }
    }

    pub fn set(&mut self, i: u64, x: T) {
        assert!(i < self.size(), "table index out of range");
        match self {
            Table::Dense(v) => v[i as usize] = x,
            Table::Sparse { map, .. } => {
                if x == T::zero() {
                    map.remove(&i);
                } else {
                    map.insert(i, x);
                }
            }
        }
    }

    /// Non-zero entries in increasing index order.
    pub fn iter(&self) -> Box<dyn Iterator<Item = (u64, T)> + '_> {
        match self {
            Table::Dense(v) => Box::new(
                v.iter()
                    .enumerate()
                    .filter(|(_, x)| **x != T::zero())
                    .map(|(i, x)| (i as u64, *x)),
            ),
            Table::Sparse { map, .. } => Box::new(map.iter().map(|(i, x)| (*i, *x))),
        }
    }

    pub fn support_len(&self) -> usize {
        self.iter().count()
    }

    pub fn total(&self) -> T {
        self.iter().map(|(_, x)| x).sum()
    }

    pub fn scale(&mut self, f: T) {
        match self {
            Table::Dense(v) => v.iter_mut().for_each(|x| *x *= f),
            Table::Sparse { map, .. } => map.values_mut().for_each(|x| *x *= f),
        }
    }

    pub fn map_values<U: Real>(&self, f: impl Fn(T) -> U) -> Table<U> {
        Table::from_entries(self.size(), self.iter().map(|(i, x)| (i, f(x))))
    }
}
