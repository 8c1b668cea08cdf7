use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::matlib::{check_finite, check_square, Mat};

use super::idempotent::{idempotents, DEFAULT_GROUPING_TOL};
use super::AssociationScheme;

impl AssociationScheme {
    /// Build and validate a scheme from a labeled partition of `I x I`.
    ///
    /// `classes[i][j]` is the class of the pair `(i, j)`; labels must be
    /// `0..=n`, each used, with class 0 exactly the diagonal.
    pub fn from_partition(classes: Vec<Vec<usize>>) -> Result<Self> {
        let r = classes.len();
        if r == 0 {
            return Err(Error::NotAScheme("empty point set".into()));
        }
        if classes.iter().any(|row| row.len() != r) {
            return Err(Error::dims("class matrix must be square"));
        }
        let n_labels = classes.iter().flatten().copied().max().unwrap_or(0) + 1;
        for i in 0..r {
            for j in 0..r {
                let c = classes[i][j];
                if (i == j) != (c == 0) {
                    return Err(Error::NotAScheme(format!(
                        "class 0 must be exactly the diagonal; pair ({i},{j}) has class {c}"
                    )));
                }
                if classes[j][i] != c {
                    return Err(Error::NotAScheme(format!(
                        "class {c} is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        let mut valencies = vec![0usize; n_labels];
        for (q, v) in valencies.iter_mut().enumerate() {
            let row0 = classes[0].iter().filter(|&&c| c == q).count();
            for (i, row) in classes.iter().enumerate() {
                let cnt = row.iter().filter(|&&c| c == q).count();
                if cnt != row0 {
                    return Err(Error::NotAScheme(format!(
                        "class {q} has {row0} entries in row 0 but {cnt} in row {i}"
                    )));
                }
            }
            if row0 == 0 {
                return Err(Error::NotAScheme(format!("class label {q} is unused")));
            }
            *v = row0;
        }

        // w[q][q1][q2], checked constant over each class q
        let mut w: Vec<Vec<Vec<Option<i64>>>> = vec![vec![vec![None; n_labels]; n_labels]; n_labels];
        let mut counts = vec![vec![0i64; n_labels]; n_labels];
        for i in 0..r {
            for j in 0..r {
                for row in counts.iter_mut() {
                    row.iter_mut().for_each(|c| *c = 0);
                }
                for k in 0..r {
                    counts[classes[i][k]][classes[k][j]] += 1;
                }
                let q = classes[i][j];
                for q1 in 0..n_labels {
                    for q2 in 0..n_labels {
                        let c = counts[q1][q2];
                        match w[q][q1][q2] {
                            None => w[q][q1][q2] = Some(c),
                            Some(prev) if prev != c => {
                                return Err(Error::NotAScheme(format!(
                                    "triangle count for classes ({q1},{q2}) over class {q} \
                                     is not constant ({prev} vs {c} at ({i},{j}))"
                                )))
                            }
                            _ => {}
                        }
                    }
                }
            }
        }
        let structural_constants: Vec<Vec<Vec<i64>>> = w
            .into_iter()
            .map(|a| a.into_iter().map(|b| b.into_iter().map(|c| c.unwrap_or(0)).collect()).collect())
            .collect();
        let adjacency: Vec<Mat> = (0..n_labels)
            .map(|q| Mat::from_fn(r, r, |i, j| if classes[i][j] == q { 1.0 } else { 0.0 }))
            .collect();

        let mut scheme = AssociationScheme {
            classes,
            adjacency,
            valencies,
            structural_constants,
            idempotents: Vec::new(),
            eigen_table: Vec::new(),
        };
        scheme.verify_products()?;
        let basis = idempotents(&scheme, DEFAULT_GROUPING_TOL)?;
        scheme.idempotents = basis.projectors;
        scheme.eigen_table = basis.eigen_table;
        Ok(scheme)
    }

    /// Class matrix given as a real matrix of non-negative integer labels, as
    /// read from a scheme file.
    pub fn from_class_matrix(m: &Mat) -> Result<Self> {
        check_square(m, "class matrix")?;
        check_finite(m, "class matrix")?;
        let r = m.nrows();
        let mut classes = vec![vec![0usize; r]; r];
        for i in 0..r {
            for j in 0..r {
                let v = m[(i, j)];
                if v < 0.0 || v.fract() != 0.0 {
                    return Err(Error::NotAScheme(format!(
                        "class label at ({i},{j}) is {v}, expected a non-negative integer"
                    )));
                }
                classes[i][j] = v as usize;
            }
        }
        Self::from_partition(classes)
    }

    /// Distance scheme of a distance-regular graph given by its adjacency.
    pub fn from_distance_regular_graph(adj: &Mat) -> Result<Self> {
        check_square(adj, "adjacency")?;
        let r = adj.nrows();
        for i in 0..r {
            for j in 0..r {
                let v = adj[(i, j)];
                if v != 0.0 && v != 1.0 {
                    return Err(Error::Precondition(format!(
                        "adjacency entry ({i},{j}) is {v}, expected 0 or 1"
                    )));
                }
                if v != adj[(j, i)] {
                    return Err(Error::Precondition(format!(
                        "adjacency is not symmetric at ({i},{j})"
                    )));
                }
            }
            if adj[(i, i)] != 0.0 {
                return Err(Error::Precondition(format!("self loop at vertex {i}")));
            }
        }
        let mut dist = vec![vec![usize::MAX; r]; r];
        for (src, d) in dist.iter_mut().enumerate() {
            d[src] = 0;
            let mut queue = VecDeque::from([src]);
            while let Some(u) = queue.pop_front() {
                for v in 0..r {
                    if adj[(u, v)] == 1.0 && d[v] == usize::MAX {
                        d[v] = d[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
            if d.contains(&usize::MAX) {
                return Err(Error::Precondition("graph is not connected".into()));
            }
        }
        let scheme = Self::from_partition(dist).map_err(|e| match e {
            Error::NotAScheme(m) => Error::NotAScheme(format!("graph is not distance regular: {m}")),
            other => other,
        })?;
        scheme.verify_distance_recursion()?;
        Ok(scheme)
    }

    /// Trivial scheme `{Id, J - Id}` on `r >= 2` points.
    pub fn trivial(r: usize) -> Result<Self> {
        if r < 2 {
            return Err(Error::Precondition("trivial scheme needs at least 2 points".into()));
        }
        Self::from_partition(
            (0..r)
                .map(|i| (0..r).map(|j| usize::from(i != j)).collect())
                .collect(),
        )
    }

    /// Distance scheme of the cycle graph on `r >= 3` vertices.
    pub fn cycle(r: usize) -> Result<Self> {
        if r < 3 {
            return Err(Error::Precondition("cycle needs at least 3 vertices".into()));
        }
        Self::from_distance_regular_graph(&cycle_adjacency(r))
    }

    /// Two disjoint triangles on six points: class 1 joins points of the same
    /// triangle, class 2 points of different triangles.
    pub fn two_triangles() -> Self {
        let classes = (0..6)
            .map(|i| {
                (0..6)
                    .map(|j| match (i == j, i / 3 == j / 3) {
                        (true, _) => 0,
                        (false, true) => 1,
                        (false, false) => 2,
                    })
                    .collect()
            })
            .collect();
        Self::from_partition(classes).expect("two-triangle partition is a scheme")
    }

    /// `B_{q1} B_{q2} = sum_q w^q_{q1,q2} B_q`, checked in integers.
    fn verify_products(&self) -> Result<()> {
        let r = self.points();
        let n1 = self.adjacency.len();
        // 0/1 products are integers well inside the exact f64 range
        for q1 in 0..n1 {
            for q2 in 0..n1 {
                let prod = &self.adjacency[q1] * &self.adjacency[q2];
                for i in 0..r {
                    for j in 0..r {
                        let q = self.classes[i][j];
                        if prod[(i, j)] != self.structural_constants[q][q1][q2] as f64 {
                            return Err(Error::NotAScheme(format!(
                                "B_{q1} B_{q2} differs from its structural expansion at ({i},{j})"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// `B_1 B_q = c_{q-1} B_{q-1} + (a_1 - b_q - c_q) B_q + b_{q+1} B_{q+1}`
    /// with `a_q = w^0_{q,q}`, `b_q = w^q_{q-1,1}`, `c_q = w^q_{q+1,1}`.
    fn verify_distance_recursion(&self) -> Result<()> {
        let d = self.class_count();
        if d == 0 {
            return Ok(());
        }
        let w = |q: usize, q1: isize, q2: usize| -> i64 {
            if q1 < 0 || q1 as usize > d {
                0
            } else {
                self.structural_constants[q][q1 as usize][q2]
            }
        };
        let b = |q: usize| w(q, q as isize - 1, 1);
        let c = |q: usize| w(q, q as isize + 1, 1);
        let a1 = self.structural_constants[0][1][1];
        let r = self.points();
        for q in 0..=d {
            let lhs = &self.adjacency[1] * &self.adjacency[q];
            let mut rhs = (a1 - b(q) - c(q)) as f64 * &self.adjacency[q];
            if q >= 1 {
                rhs += c(q - 1) as f64 * &self.adjacency[q - 1];
            }
            if q < d {
                rhs += b(q + 1) as f64 * &self.adjacency[q + 1];
            }
            if (lhs - rhs).amax() > 0.5 / r as f64 {
                return Err(Error::NotAScheme(format!(
                    "distance recursion fails at q = {q}"
                )));
            }
        }
        Ok(())
    }
}

/// Adjacency matrix of the cycle graph on `r` vertices.
pub fn cycle_adjacency(r: usize) -> Mat {
    Mat::from_fn(r, r, |i, j| {
        let d = i.abs_diff(j);
        if d == 1 || d == r - 1 {
            1.0
        } else {
            0.0
        }
    })
}

/// Adjacency matrix of the path graph on `r` vertices.
pub fn path_adjacency(r: usize) -> Mat {
    Mat::from_fn(r, r, |i, j| if i.abs_diff(j) == 1 { 1.0 } else { 0.0 })
}
