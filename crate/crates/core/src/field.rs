//! Scalar fields of `(x, t)` used as control payloads.
//!
//! A field is either a closed-form expression (from the [`crate::expr`]
//! grammar) or a sampled table: piecewise constant in time over declared
//! slab edges and piecewise linear in space through declared node values.
//! Tables are exact at their own nodes, which is what makes schedule
//! documents round-trip bit-exactly.

use crate::error::{Error, Result};
use crate::expr::Expr;
use serde::{Deserialize, Serialize};

/// Sampled field: `values[k][i]` applies for `t` in the k-th slab
/// `(t_edges[k], t_edges[k+1]]` at node position `x_nodes[i]`.
///
/// In space the table interpolates linearly between nodes and decays
/// linearly to zero at the ends of the sampled range (Dirichlet-compatible).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldTable {
    pub t_edges: Vec<f64>,
    pub x_nodes: Vec<f64>,
    /// Left/right anchor positions where the field is pinned to zero.
    pub x_zero: (f64, f64),
    pub values: Vec<Vec<f64>>,
}

impl FieldTable {
    pub fn new(
        t_edges: Vec<f64>,
        x_nodes: Vec<f64>,
        x_zero: (f64, f64),
        values: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if t_edges.len() < 2 || t_edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("field table needs increasing time edges"));
        }
        if values.len() != t_edges.len() - 1 {
            return Err(Error::invalid("field table needs one value row per time slab"));
        }
        if x_nodes.is_empty() || x_nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("field table needs increasing node positions"));
        }
        if values.iter().any(|row| row.len() != x_nodes.len()) {
            return Err(Error::invalid("field table rows must match node count"));
        }
        Ok(FieldTable { t_edges, x_nodes, x_zero, values })
    }

    fn slab_index(&self, t: f64) -> usize {
        // slab k covers (e_k, e_{k+1}]; t at or before the first edge maps
        // to slab 0, t past the last edge to the final slab.
        let k = self.t_edges.partition_point(|&e| e < t);
        k.saturating_sub(1).min(self.values.len() - 1)
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        let row = &self.values[self.slab_index(t)];
        let nodes = &self.x_nodes;
        // exact node hit first (bit-exact round trips)
        let j = nodes.partition_point(|&p| p < x);
        if j < nodes.len() && nodes[j] == x {
            return row[j];
        }
        if j == 0 {
            let (zl, _) = self.x_zero;
            if x <= zl {
                return 0.0;
            }
            let w = (x - zl) / (nodes[0] - zl);
            return w * row[0];
        }
        if j == nodes.len() {
            let (_, zr) = self.x_zero;
            if x >= zr {
                return 0.0;
            }
            let last = nodes.len() - 1;
            let w = (zr - x) / (zr - nodes[last]);
            return w * row[last];
        }
        let w = (x - nodes[j - 1]) / (nodes[j] - nodes[j - 1]);
        row[j - 1] + w * (row[j] - row[j - 1])
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|row| row.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|row| row.iter())
            .fold(f64::INFINITY, |m, v| m.min(*v))
    }
}

/// Control payload field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Field {
    Expr { src: String },
    Table(FieldTable),
}

impl Field {
    pub fn parse_expr(src: &str) -> Result<Field> {
        Expr::parse(src)?; // validate now; re-parse on eval is avoided via cache
        Ok(Field::Expr { src: src.to_string() })
    }

    pub fn table(table: FieldTable) -> Field {
        Field::Table(table)
    }

    /// True if the field cannot vary in time (single-slab table, or an
    /// expression that never mentions `t`).
    pub fn is_time_independent(&self) -> Result<bool> {
        match self {
            Field::Table(t) => Ok(t.values.len() == 1),
            Field::Expr { src } => Ok(!Expr::parse(src)?.depends_on_t()),
        }
    }

    /// Compile into an evaluator. Expression fields parse once here.
    pub fn compiled(&self) -> Result<CompiledField> {
        match self {
            Field::Expr { src } => Ok(CompiledField::Expr(Expr::parse(src)?)),
            Field::Table(t) => Ok(CompiledField::Table(t.clone())),
        }
    }

    /// Largest |value| over a sample lattice (tables: their own samples;
    /// expressions: `nx × nt` dense sampling of the given rectangle).
    pub fn sampled_max_abs(&self, x_range: (f64, f64), t_range: (f64, f64)) -> Result<f64> {
        match self {
            Field::Table(t) => Ok(t.max_abs()),
            Field::Expr { .. } => {
                let c = self.compiled()?;
                let mut m = 0.0_f64;
                let (nx, nt) = (129, 65);
                for i in 0..=nx {
                    let x = x_range.0 + (x_range.1 - x_range.0) * i as f64 / nx as f64;
                    for k in 0..=nt {
                        let t = t_range.0 + (t_range.1 - t_range.0) * k as f64 / nt as f64;
                        m = m.max(c.eval(x, t).abs());
                    }
                }
                Ok(m)
            }
        }
    }

    /// Largest value over the same lattice (used to certify nonpositivity
    /// of multiplicative payloads).
    pub fn sampled_max(&self, x_range: (f64, f64), t_range: (f64, f64)) -> Result<f64> {
        match self {
            Field::Table(t) => Ok(t
                .values
                .iter()
                .flat_map(|row| row.iter())
                .fold(f64::NEG_INFINITY, |m, v| m.max(*v))),
            Field::Expr { .. } => {
                let c = self.compiled()?;
                let mut m = f64::NEG_INFINITY;
                let (nx, nt) = (129, 65);
                for i in 0..=nx {
                    let x = x_range.0 + (x_range.1 - x_range.0) * i as f64 / nx as f64;
                    for k in 0..=nt {
                        let t = t_range.0 + (t_range.1 - t_range.0) * k as f64 / nt as f64;
                        m = m.max(c.eval(x, t));
                    }
                }
                Ok(m)
            }
        }
    }

    /// Smallest value over the same lattice (used to certify nonnegativity
    /// of additive payloads).
    pub fn sampled_min(&self, x_range: (f64, f64), t_range: (f64, f64)) -> Result<f64> {
        match self {
            Field::Table(t) => Ok(t.min_value()),
            Field::Expr { .. } => {
                let c = self.compiled()?;
                let mut m = f64::INFINITY;
                let (nx, nt) = (129, 65);
                for i in 0..=nx {
                    let x = x_range.0 + (x_range.1 - x_range.0) * i as f64 / nx as f64;
                    for k in 0..=nt {
                        let t = t_range.0 + (t_range.1 - t_range.0) * k as f64 / nt as f64;
                        m = m.min(c.eval(x, t));
                    }
                }
                Ok(m)
            }
        }
    }
}

/// Evaluable form of a [`Field`].
#[derive(Debug, Clone)]
pub enum CompiledField {
    Expr(Expr),
    Table(FieldTable),
}

impl CompiledField {
    #[inline]
    pub fn eval(&self, x: f64, t: f64) -> f64 {
        match self {
            CompiledField::Expr(e) => e.eval(x, t, 0.0),
            CompiledField::Table(t_) => t_.eval(x, t),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_exact_at_nodes_and_linear_between() {
        let t = FieldTable::new(
            vec![0.0, 1.0],
            vec![0.25, 0.5, 0.75],
            (0.0, 1.0),
            vec![vec![1.0, 2.0, 4.0]],
        )
        .unwrap();
        assert_eq!(t.eval(0.5, 0.5), 2.0);
        assert!((t.eval(0.375, 0.5) - 1.5).abs() < 1e-15);
        // linear decay to the zero anchors
        assert!((t.eval(0.125, 0.5) - 0.5).abs() < 1e-15);
        assert_eq!(t.eval(0.0, 0.5), 0.0);
    }

    #[test]
    fn table_time_slabs_are_left_open() {
        let t = FieldTable::new(
            vec![0.0, 0.5, 1.0],
            vec![0.5],
            (0.0, 1.0),
            vec![vec![1.0], vec![3.0]],
        )
        .unwrap();
        assert_eq!(t.eval(0.5, 0.2), 1.0);
        assert_eq!(t.eval(0.5, 0.5), 1.0); // t = first slab's right edge
        assert_eq!(t.eval(0.5, 0.6), 3.0);
        assert_eq!(t.eval(0.5, 1.0), 3.0);
    }

    #[test]
    fn field_json_round_trip_is_bit_exact() {
        let f = Field::table(
            FieldTable::new(
                vec![0.0, 0.1],
                vec![0.3, 0.6],
                (0.25, 0.65),
                vec![vec![0.1 + 0.2, 1.0 / 3.0]],
            )
            .unwrap(),
        );
        let json = serde_json::to_string(&f).unwrap();
        let g: Field = serde_json::from_str(&json).unwrap();
        let (cf, cg) = (f.compiled().unwrap(), g.compiled().unwrap());
        for &x in &[0.3, 0.45, 0.6] {
            assert_eq!(cf.eval(x, 0.05).to_bits(), cg.eval(x, 0.05).to_bits());
        }
    }
}
