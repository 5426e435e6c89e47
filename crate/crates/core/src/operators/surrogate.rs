use super::fiber::fiber_of;
use super::graph::graph_sample;
use super::resolvent::resolvent;
use super::{FiniteGraph, OperatorSpec};
use crate::error::Result;
use crate::vecspace::{Grid, PairPoint, ToleranceConfig, Vector};

/// A recession direction of the fiber at `graph.pairs()[index]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RayAt {
    pub index: usize,
    pub ray: Vector,
}

fn collect_rays(op: &OperatorSpec, graph: &FiniteGraph, tol: &ToleranceConfig) -> Vec<RayAt> {
    graph
        .pairs()
        .iter()
        .enumerate()
        .flat_map(|(index, p)| {
            fiber_of(op, &p.primal, tol)
                .rays
                .into_iter()
                .map(move |ray| RayAt { index, ray })
        })
        .collect()
}

/// A finite sample of `gra A` together with the fiber rays at each sample,
/// so that unbounded dual directions can be followed analytically.
#[derive(Clone, Debug)]
pub struct Surrogate {
    op: OperatorSpec,
    pub graph: FiniteGraph,
    pub rays: Vec<RayAt>,
}

impl Surrogate {
    /// Graph specs are their own surrogate; anything else is Minty-sampled
    /// over `wgrid`.
    pub fn build(op: &OperatorSpec, wgrid: &Grid, tol: &ToleranceConfig) -> Result<Surrogate> {
        match op {
            OperatorSpec::Graph { graph } => Ok(Surrogate {
                op: op.clone(),
                graph: graph.clone(),
                rays: Vec::new(),
            }),
            _ => {
                let graph = graph_sample(op, wgrid, tol)?;
                let rays = collect_rays(op, &graph, tol);
                Ok(Surrogate {
                    op: op.clone(),
                    graph,
                    rays,
                })
            }
        }
    }

    /// Wraps an existing sample of `gra op`, attaching fiber rays.
    pub fn from_graph(op: &OperatorSpec, graph: FiniteGraph, tol: &ToleranceConfig) -> Surrogate {
        let rays = if matches!(op, OperatorSpec::Graph { .. }) {
            Vec::new()
        } else {
            collect_rays(op, &graph, tol)
        };
        Surrogate {
            op: op.clone(),
            graph,
            rays,
        }
    }

    pub fn op(&self) -> &OperatorSpec {
        &self.op
    }

    pub fn pairs(&self) -> &[PairPoint] {
        self.graph.pairs()
    }

    pub fn is_finite_graph(&self) -> bool {
        matches!(self.op, OperatorSpec::Graph { .. })
    }

    /// Rays attached to sample `index`.
    pub fn rays_at(&self, index: usize) -> impl Iterator<Item = &Vector> {
        self.rays.iter().filter(move |r| r.index == index).map(|r| &r.ray)
    }

    /// Distinct sampled domain points in sample order.
    pub fn domain_points(&self, tol: &ToleranceConfig) -> Vec<Vector> {
        let mut out: Vec<Vector> = Vec::new();
        for p in self.pairs() {
            if !out.iter().any(|q| q.dist(&p.primal) <= tol.eq_tol) {
                out.push(p.primal.clone());
            }
        }
        out
    }

    /// The graph point `(J_A(x + x*), x + x* - J_A(x + x*))` paired with `pt`;
    /// `None` for finite graphs.
    pub fn minty(&self, pt: &PairPoint, tol: &ToleranceConfig) -> Option<PairPoint> {
        if self.is_finite_graph() {
            return None;
        }
        let w = &pt.primal + &pt.dual;
        let a = resolvent(&self.op, &w, tol).ok()?;
        let astar = &w - &a;
        Some(PairPoint { primal: a, dual: astar })
    }
}
