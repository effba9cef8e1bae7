//! Manufactured solutions on the unit square and cube.
//!
//! Velocities are curls of products of `g(s) = s²(1 − s)²`, so they are
//! divergence-free and vanish (with their normal derivatives) on the walls.
//! Each is multiplied by `A e^{−t}`; the pressure is
//! `P e^{−t} Π cos(π x_a)`, which has zero mean.

use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const PROBLEMS: &[&str] = &["poly2d", "poly3d", "quiescent2d", "quiescent3d"];

/// `c · g^{(o₀)}(x) g^{(o₁)}(y) g^{(o₂)}(z)`.
#[derive(Debug, Clone, Copy)]
struct Term {
    coef: f64,
    orders: [u8; 3],
}

fn g(order: u8, s: f64) -> f64 {
    match order {
        0 => s * s * (1.0 - s) * (1.0 - s),
        1 => 2.0 * s * (1.0 - s) * (1.0 - 2.0 * s),
        2 => 2.0 * (1.0 - 6.0 * s + 6.0 * s * s),
        3 => 24.0 * s - 12.0,
        4 => 24.0,
        _ => 0.0,
    }
}

#[derive(Debug, Clone)]
pub struct MmsProblem {
    pub name: &'static str,
    pub dim: usize,
    pub amplitude: f64,
    pub pressure_amplitude: f64,
    components: [Vec<Term>; 3],
}

impl MmsProblem {
    fn eval(&self, terms: &[Term], x: [f64; 3], shift: Option<usize>, twice: bool) -> f64 {
        terms
            .iter()
            .map(|t| {
                let mut o = t.orders;
                if let Some(a) = shift {
                    o[a] += if twice { 2 } else { 1 };
                }
                (0..self.dim).fold(t.coef, |acc, a| acc * g(o[a], x[a]))
            })
            .sum()
    }

    /// Spatial profile `U(x)`; `u = A e^{−t} U`.
    fn profile(&self, x: [f64; 3]) -> [f64; 3] {
        let mut u = [0.0; 3];
        for (i, ui) in u.iter_mut().enumerate().take(self.dim) {
            *ui = self.eval(&self.components[i], x, None, false);
        }
        u
    }

    /// `∂U_i/∂x_a` as `[i][a]`.
    fn profile_gradient(&self, x: [f64; 3]) -> [[f64; 3]; 3] {
        let mut d = [[0.0; 3]; 3];
        for i in 0..self.dim {
            for a in 0..self.dim {
                d[i][a] = self.eval(&self.components[i], x, Some(a), false);
            }
        }
        d
    }

    fn profile_laplacian(&self, x: [f64; 3]) -> [f64; 3] {
        let mut l = [0.0; 3];
        for (i, li) in l.iter_mut().enumerate().take(self.dim) {
            *li = (0..self.dim).map(|a| self.eval(&self.components[i], x, Some(a), true)).sum();
        }
        l
    }

    pub fn velocity(&self, t: f64, x: [f64; 3]) -> [f64; 3] {
        let s = self.amplitude * (-t).exp();
        self.profile(x).map(|v| s * v)
    }

    pub fn pressure(&self, t: f64, x: [f64; 3]) -> f64 {
        (0..self.dim).fold(self.pressure_amplitude * (-t).exp(), |acc, a| acc * (PI * x[a]).cos())
    }

    pub fn pressure_gradient(&self, t: f64, x: [f64; 3]) -> [f64; 3] {
        let mut gp = [0.0; 3];
        for (a, ga) in gp.iter_mut().enumerate().take(self.dim) {
            *ga = (0..self.dim).fold(self.pressure_amplitude * (-t).exp(), |acc, b| {
                if b == a {
                    -acc * PI * (PI * x[b]).sin()
                } else {
                    acc * (PI * x[b]).cos()
                }
            });
        }
        gp
    }

    /// `f = ∂ₜu + (u·∇)u − Δu + ∇p` (unit density and viscosity).
    pub fn forcing(&self, t: f64, x: [f64; 3]) -> [f64; 3] {
        let e = (-t).exp();
        let a = self.amplitude;
        let u = self.profile(x);
        let du = self.profile_gradient(x);
        let lap = self.profile_laplacian(x);
        let gp = self.pressure_gradient(t, x);
        let mut f = [0.0; 3];
        for i in 0..self.dim {
            let adv: f64 = (0..self.dim).map(|b| u[b] * du[i][b]).sum();
            f[i] = -a * e * u[i] + a * a * e * e * adv - a * e * lap[i] + gp[i];
        }
        f
    }

    /// Pointwise `div u` from the closed-form derivatives.
    pub fn divergence(&self, t: f64, x: [f64; 3]) -> f64 {
        let du = self.profile_gradient(x);
        self.amplitude * (-t).exp() * (0..self.dim).map(|a| du[a][a]).sum::<f64>()
    }
}

fn term(coef: f64, orders: [u8; 3]) -> Term {
    Term { coef, orders }
}

/// Looks up a registered manufactured solution.
pub fn mms_problem(name: &str) -> Result<MmsProblem> {
    let p = match name {
        // ψ = g(x)g(y), u = (∂_y ψ, −∂_x ψ).
        "poly2d" | "quiescent2d" => MmsProblem {
            name: if name == "poly2d" { "poly2d" } else { "quiescent2d" },
            dim: 2,
            amplitude: 40.0,
            pressure_amplitude: 0.5,
            components: [vec![term(1.0, [0, 1, 0])], vec![term(-1.0, [1, 0, 0])], vec![]],
        },
        // u = curl(ψ, ψ, ψ) with ψ = g(x)g(y)g(z).
        "poly3d" | "quiescent3d" => MmsProblem {
            name: if name == "poly3d" { "poly3d" } else { "quiescent3d" },
            dim: 3,
            amplitude: 160.0,
            pressure_amplitude: 0.5,
            components: [
                vec![term(1.0, [0, 1, 0]), term(-1.0, [0, 0, 1])],
                vec![term(1.0, [0, 0, 1]), term(-1.0, [1, 0, 0])],
                vec![term(1.0, [1, 0, 0]), term(-1.0, [0, 1, 0])],
            ],
        },
        _ => return Err(Error::UnknownProblem(name.to_string())),
    };
    Ok(if name.starts_with("quiescent") {
        MmsProblem { amplitude: 0.0, pressure_amplitude: 0.0, ..p }
    } else {
        p
    })
}
