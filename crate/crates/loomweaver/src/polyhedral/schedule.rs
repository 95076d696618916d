//! Schedules in 2d+1 form: static scalar coordinates interleaved with
//! loop dimensions, ordered lexicographically.

use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SchedCoord {
    /// Fixed integer position between loops.
    Static(i64),
    /// A loop dimension, named after the domain dimension it scans.
    Loop(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleMap {
    /// `[c0, d0, c1, d1, .., dn-1, cn]`; statics at even indices.
    pub coords: Vec<SchedCoord>,
}

impl ScheduleMap {
    /// Identity schedule over `dims` with leading static `order_index`.
    pub fn identity(dims: &[String], order_index: i64) -> Self {
        let mut coords = vec![SchedCoord::Static(order_index)];
        for d in dims {
            coords.push(SchedCoord::Loop(d.clone()));
            coords.push(SchedCoord::Static(0));
        }
        ScheduleMap { coords }
    }

    pub fn depth(&self) -> usize {
        self.coords.len() / 2
    }

    /// Loop dimension names in schedule order.
    pub fn loop_dims(&self) -> Vec<&str> {
        self.coords
            .iter()
            .filter_map(|c| match c {
                SchedCoord::Loop(name) => Some(name.as_str()),
                SchedCoord::Static(_) => None,
            })
            .collect()
    }

    /// Index into `coords` of the n-th loop coordinate.
    pub fn loop_pos(&self, level: usize) -> usize {
        2 * level + 1
    }

    /// Evaluate the full 2d+1 tuple for one iteration point.
    pub fn tuple(&self, env: &BTreeMap<String, i64>) -> Vec<i64> {
        self.coords
            .iter()
            .map(|c| match c {
                SchedCoord::Static(v) => *v,
                SchedCoord::Loop(name) => *env.get(name).unwrap_or(&0),
            })
            .collect()
    }

    /// Swap the loop coordinates holding dims `a` and `b`.
    pub fn swap_loops(&mut self, a: &str, b: &str) {
        let pa = self.coords.iter().position(|c| matches!(c, SchedCoord::Loop(n) if n == a));
        let pb = self.coords.iter().position(|c| matches!(c, SchedCoord::Loop(n) if n == b));
        if let (Some(pa), Some(pb)) = (pa, pb) {
            self.coords.swap(pa, pb);
        }
    }

    /// Replace the loop coordinate for `dim` by two coordinates
    /// `(outer, inner)` separated by a fresh static 0.
    pub fn split_loop(&mut self, dim: &str, outer: &str, inner: &str) {
        if let Some(pos) = self
            .coords
            .iter()
            .position(|c| matches!(c, SchedCoord::Loop(n) if n == dim))
        {
            self.coords.splice(
                pos..=pos,
                [
                    SchedCoord::Loop(outer.to_string()),
                    SchedCoord::Static(0),
                    SchedCoord::Loop(inner.to_string()),
                ],
            );
        }
    }

    pub fn rename_loop(&mut self, from: &str, to: &str) {
        for c in &mut self.coords {
            if let SchedCoord::Loop(name) = c {
                if name == from {
                    *name = to.to_string();
                }
            }
        }
    }
}

impl fmt::Display for ScheduleMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .coords
            .iter()
            .map(|c| match c {
                SchedCoord::Static(v) => v.to_string(),
                SchedCoord::Loop(name) => name.clone(),
            })
            .collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_shape() {
        let s = ScheduleMap::identity(&["i".into(), "j".into()], 0);
        assert_eq!(s.to_string(), "[0, i, 0, j, 0]");
        assert_eq!(s.depth(), 2);
    }

    #[test]
    fn split_inserts_static() {
        let mut s = ScheduleMap::identity(&["t".into(), "i".into()], 0);
        s.split_loop("i", "i0", "i1");
        assert_eq!(s.to_string(), "[0, t, 0, i0, 0, i1, 0]");
    }
}
