//! Dense Edmonds-Karp max-flow for the small bipartite checks in plan search
//! and cut tightness.

use std::collections::VecDeque;

#[derive(Debug, Clone)]
pub struct FlowNetwork {
    n: usize,
    cap: Vec<i64>,
    residual: Vec<i64>,
}

impl FlowNetwork {
    pub fn new(n: usize) -> FlowNetwork {
        FlowNetwork {
            n,
            cap: vec![0; n * n],
            residual: vec![0; n * n],
        }
    }

    pub fn add_edge(&mut self, u: usize, v: usize, c: i64) {
        self.cap[u * self.n + v] += c;
        self.residual[u * self.n + v] += c;
    }

    pub fn max_flow(&mut self, s: usize, t: usize) -> i64 {
        let n = self.n;
        let mut total = 0;
        let mut prev = vec![usize::MAX; n];
        loop {
            prev.iter_mut().for_each(|p| *p = usize::MAX);
            prev[s] = s;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                if u == t {
                    break;
                }
                for v in 0..n {
                    if prev[v] == usize::MAX && self.residual[u * n + v] > 0 {
                        prev[v] = u;
                        queue.push_back(v);
                    }
                }
            }
            if prev[t] == usize::MAX {
                return total;
            }
            let mut push = i64::MAX;
            let mut v = t;
            while v != s {
                let u = prev[v];
                push = push.min(self.residual[u * n + v]);
                v = u;
            }
            let mut v = t;
            while v != s {
                let u = prev[v];
                self.residual[u * n + v] -= push;
                self.residual[v * n + u] += push;
                v = u;
            }
            total += push;
        }
    }

    /// Flow on the original edge `u → v` after [`FlowNetwork::max_flow`].
    pub fn flow(&self, u: usize, v: usize) -> i64 {
        (self.cap[u * self.n + v] - self.residual[u * self.n + v]).max(0)
    }
}
