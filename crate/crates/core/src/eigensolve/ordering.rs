//! Nested dissection ordering from BFS level structures.

use crate::fem::CsrMatrix;

const LEAF: usize = 64;

struct Graph<'a> {
    a: &'a CsrMatrix,
    stamp: Vec<u32>,
    level: Vec<u32>,
    counter: u32,
}

impl Graph<'_> {
    fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.a.row(v).0.iter().copied().filter(move |&w| w != v)
    }

    fn mark(&mut self, nodes: &[usize]) -> u32 {
        self.counter += 1;
        for &v in nodes {
            self.stamp[v] = self.counter;
        }
        self.counter
    }

    /// BFS inside the marked set; returns the levels.
    fn levels(&mut self, root: usize, set: u32) -> Vec<Vec<usize>> {
        const UNSEEN: u32 = u32::MAX;
        let mut out: Vec<Vec<usize>> = vec![vec![root]];
        let mut seen = vec![root];
        self.level[root] = 0;
        loop {
            let mut next = Vec::new();
            for &v in out.last().unwrap() {
                for w in self.a.row(v).0 {
                    let w = *w;
                    if w != v && self.stamp[w] == set && self.level[w] == UNSEEN {
                        self.level[w] = out.len() as u32;
                        next.push(w);
                        seen.push(w);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            out.push(next);
        }
        // leave `level` clean for the next search
        for v in seen {
            self.level[v] = UNSEEN;
        }
        out
    }

    fn dissect(&mut self, nodes: Vec<usize>, out: &mut Vec<usize>) {
        if nodes.len() <= LEAF {
            out.extend(nodes);
            return;
        }
        let set = self.mark(&nodes);
        let mut levels = self.levels(nodes[0], set);
        let reached: usize = levels.iter().map(Vec::len).sum();
        if reached < nodes.len() {
            // order each connected component on its own
            let mut comps = vec![levels.concat()];
            let done = self.counter + 1;
            self.counter += 1;
            for &v in &comps[0] {
                self.stamp[v] = done;
            }
            for &v in &nodes {
                if self.stamp[v] == set {
                    let comp = self.levels(v, set).concat();
                    for &w in &comp {
                        self.stamp[w] = done;
                    }
                    comps.push(comp);
                }
            }
            for comp in comps {
                self.dissect(comp, out);
            }
            return;
        }
        // pseudo-peripheral root
        for _ in 0..4 {
            let last = levels.last().unwrap();
            let cand = *last
                .iter()
                .min_by_key(|&&v| (self.neighbors(v).count(), v))
                .unwrap();
            let trial = self.levels(cand, set);
            if trial.len() > levels.len() {
                levels = trial;
            } else {
                break;
            }
        }
        if levels.len() < 3 {
            out.extend(nodes);
            return;
        }
        let half = nodes.len() / 2;
        let mut acc = 0;
        let mut s = 1;
        for (l, lv) in levels.iter().enumerate() {
            acc += lv.len();
            if acc >= half {
                s = l;
                break;
            }
        }
        let s = s.clamp(1, levels.len() - 2);
        // separator nodes without a neighbour beyond the separator join the near side
        let far = self.mark(&levels[s + 1]);
        let mut part_a: Vec<usize> = levels[..s].concat();
        let mut sep = Vec::new();
        for &v in &levels[s] {
            if self.a.row(v).0.iter().any(|&w| self.stamp[w] == far) {
                sep.push(v);
            } else {
                part_a.push(v);
            }
        }
        let part_b: Vec<usize> = levels[s + 1..].concat();
        self.dissect(part_a, out);
        self.dissect(part_b, out);
        out.extend(sep);
    }
}

/// Fill-reducing permutation (`perm[new] = old`) for a structurally
/// symmetric matrix.
pub fn nested_dissection(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n;
    let mut g = Graph {
        a,
        stamp: vec![0; n],
        level: vec![u32::MAX; n],
        counter: 0,
    };
    let mut out = Vec::with_capacity(n);
    g.dissect((0..n).collect(), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutation_of_grid_laplacian() {
        let (nx, ny) = (40, 30);
        let id = |i: usize, j: usize| j * nx + i;
        let mut t = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                t.push((id(i, j), id(i, j), 4.0));
                if i + 1 < nx {
                    t.push((id(i, j), id(i + 1, j), -1.0));
                    t.push((id(i + 1, j), id(i, j), -1.0));
                }
                if j + 1 < ny {
                    t.push((id(i, j), id(i, j + 1), -1.0));
                    t.push((id(i, j + 1), id(i, j), -1.0));
                }
            }
        }
        let a = CsrMatrix::from_triplets(nx * ny, &t, true).unwrap();
        let mut p = nested_dissection(&a);
        p.sort_unstable();
        assert_eq!(p, (0..nx * ny).collect::<Vec<_>>());
    }

    #[test]
    fn handles_disconnected_graph() {
        let a = CsrMatrix::identity(300);
        let mut p = nested_dissection(&a);
        p.sort_unstable();
        assert_eq!(p, (0..300).collect::<Vec<_>>());
    }
}
