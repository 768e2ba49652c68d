use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::CapsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Step {
    Bfs,
    Dfs,
}

/// An ordered sequence of BFS/DFS steps, written as a string over `B` and `D`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Schedule {
    steps: Vec<Step>,
}

impl Schedule {
    pub fn new(steps: Vec<Step>) -> Self {
        Self { steps }
    }

    /// `ell` DFS steps followed by `k` BFS steps.
    pub fn dfs_then_bfs(ell: u32, k: u32) -> Self {
        let mut steps = vec![Step::Dfs; ell as usize];
        steps.extend(std::iter::repeat_n(Step::Bfs, k as usize));
        Self { steps }
    }

    pub fn all_bfs(k: u32) -> Self {
        Self::dfs_then_bfs(0, k)
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    /// Total number of distributed steps `s`.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn ell(&self) -> u32 {
        self.steps.iter().filter(|s| **s == Step::Dfs).count() as u32
    }

    pub fn k(&self) -> u32 {
        self.steps.iter().filter(|s| **s == Step::Bfs).count() as u32
    }

    /// True if every DFS step precedes every BFS step.
    pub fn is_dfs_first(&self) -> bool {
        let first_bfs = self.steps.iter().position(|s| *s == Step::Bfs);
        first_bfs.is_none_or(|i| self.steps[i..].iter().all(|s| *s == Step::Bfs))
    }

    /// Every distinct ordering of this schedule's DFS and BFS steps.
    pub fn interleavings(&self) -> Vec<Schedule> {
        fn go(ell: u32, k: u32, cur: &mut Vec<Step>, out: &mut Vec<Schedule>) {
            if ell == 0 && k == 0 {
                out.push(Schedule::new(cur.clone()));
                return;
            }
            if ell > 0 {
                cur.push(Step::Dfs);
                go(ell - 1, k, cur, out);
                cur.pop();
            }
            if k > 0 {
                cur.push(Step::Bfs);
                go(ell, k - 1, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        go(self.ell(), self.k(), &mut Vec::new(), &mut out);
        out
    }
}

impl FromStr for Schedule {
    type Err = CapsError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                'B' | 'b' => Ok(Step::Bfs),
                'D' | 'd' => Ok(Step::Dfs),
                _ => Err(CapsError::BadSchedule(s.to_string())),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Schedule::new)
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.steps {
            f.write_str(match s {
                Step::Bfs => "B",
                Step::Dfs => "D",
            })?;
        }
        Ok(())
    }
}

impl Serialize for Schedule {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Schedule {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
