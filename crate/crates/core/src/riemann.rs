//! Exact Riemann solver for two stiffened-gas materials separated by a
//! contact.

use crate::eos::MaterialParams;
use thiserror::Error;

const MAX_ITER: usize = 100;
const ROOT_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RiemannError {
    #[error("initial data generate vacuum")]
    Vacuum,
    #[error("invalid Riemann state: {0}")]
    InvalidState(String),
    #[error("star pressure iteration did not converge")]
    NoConvergence,
}

/// Primitive state on one side of the initial discontinuity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiemannState {
    pub rho: f64,
    pub u: f64,
    pub p: f64,
    pub mat: MaterialParams,
}

impl RiemannState {
    pub fn new(rho: f64, u: f64, p: f64, mat: MaterialParams) -> Result<Self, RiemannError> {
        let s = Self { rho, u, p, mat };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<(), RiemannError> {
        if !(self.rho.is_finite() && self.u.is_finite() && self.p.is_finite()) {
            return Err(RiemannError::InvalidState("non-finite value".into()));
        }
        if self.rho <= 0.0 {
            return Err(RiemannError::InvalidState(format!("rho = {}", self.rho)));
        }
        if self.p_bar() <= 0.0 {
            return Err(RiemannError::InvalidState(format!(
                "p + pi = {}",
                self.p_bar()
            )));
        }
        Ok(())
    }

    #[inline]
    fn p_bar(&self) -> f64 {
        self.p + self.mat.pi()
    }

    /// Eulerian sound speed.
    pub fn sound_speed(&self) -> f64 {
        (self.mat.gamma() * self.p_bar() / self.rho).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveKind {
    Shock,
    Rarefaction,
}

/// Intermediate state between the two nonlinear waves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StarState {
    pub p_star: f64,
    pub u_star: f64,
    pub rho_star_left: f64,
    pub rho_star_right: f64,
    pub left_wave: WaveKind,
    pub right_wave: WaveKind,
}

/// Value and derivative of the pressure function of one side.
fn side_function(s: &RiemannState, p: f64) -> (f64, f64) {
    let g = s.mat.gamma();
    let pb = p + s.mat.pi();
    let pbk = s.p_bar();
    if p > s.p {
        let a = 2.0 / ((g + 1.0) * s.rho);
        let b = (g - 1.0) / (g + 1.0) * pbk;
        let q = (a / (pb + b)).sqrt();
        let f = (p - s.p) * q;
        (f, q * (1.0 - 0.5 * (p - s.p) / (pb + b)))
    } else {
        let c = s.sound_speed();
        let ratio = pb / pbk;
        let z = (g - 1.0) / (2.0 * g);
        let f = 2.0 * c / (g - 1.0) * (ratio.powf(z) - 1.0);
        (f, ratio.powf(-(g + 1.0) / (2.0 * g)) / (s.rho * c))
    }
}

fn star_density(s: &RiemannState, p_star: f64) -> f64 {
    let g = s.mat.gamma();
    let ratio = (p_star + s.mat.pi()) / s.p_bar();
    if p_star > s.p {
        let k = (g - 1.0) / (g + 1.0);
        s.rho * (ratio + k) / (k * ratio + 1.0)
    } else {
        s.rho * ratio.powf(1.0 / g)
    }
}

fn initial_guess(l: &RiemannState, r: &RiemannState, p_min: f64) -> f64 {
    let same_material = l.mat.gamma() == r.mat.gamma() && l.mat.pi() == r.mat.pi();
    let (cl, cr) = (l.sound_speed(), r.sound_speed());
    let guess = if same_material {
        let g = l.mat.gamma();
        let pi = l.mat.pi();
        let z = (g - 1.0) / (2.0 * g);
        let num = cl + cr - 0.5 * (g - 1.0) * (r.u - l.u);
        let den = cl / l.p_bar().powf(z) + cr / r.p_bar().powf(z);
        (num / den).max(0.0).powf(1.0 / z) - pi
    } else {
        let z = 0.25 * (l.rho + r.rho) * (cl + cr);
        0.5 * (l.p + r.p) - 0.5 * (r.u - l.u) * z
    };
    if guess.is_finite() && guess > p_min {
        guess
    } else {
        p_min + 1e-6 * (l.p_bar() + r.p_bar())
    }
}

/// Star pressure and velocity of the Riemann problem `(left, right)`.
pub fn solve_star(left: &RiemannState, right: &RiemannState) -> Result<StarState, RiemannError> {
    left.validate()?;
    right.validate()?;
    let du = right.u - left.u;
    let pressure_fn = |p: f64| {
        let (fl, dl) = side_function(left, p);
        let (fr, dr) = side_function(right, p);
        (fl + fr + du, dl + dr, fl, fr)
    };

    let p_star = if left.p == right.p && du == 0.0 {
        left.p
    } else {
        let p_min = (-left.mat.pi()).max(-right.mat.pi());
        let mut p = initial_guess(left, right, p_min);
        let mut root = None;
        for _ in 0..MAX_ITER {
            let (f, df, _, _) = pressure_fn(p);
            if f == 0.0 {
                root = Some(p);
                break;
            }
            let mut next = p - f / df;
            if !(next.is_finite() && next > p_min) {
                next = 0.5 * (p + p_min);
            }
            let done = (next - p).abs() <= ROOT_TOL * (next - p_min);
            p = next;
            if done {
                root = Some(p);
                break;
            }
        }
        match root {
            Some(p) => p,
            None => {
                let scale = left.p_bar().max(right.p_bar());
                if pressure_fn(p_min + 1e-12 * scale).0 > 0.0 {
                    return Err(RiemannError::Vacuum);
                }
                return Err(RiemannError::NoConvergence);
            }
        }
    };

    let (_, _, fl, fr) = pressure_fn(p_star);
    let kind = |s: &RiemannState| {
        if p_star > s.p {
            WaveKind::Shock
        } else {
            WaveKind::Rarefaction
        }
    };
    Ok(StarState {
        p_star,
        u_star: 0.5 * (left.u + right.u) + 0.5 * (fr - fl),
        rho_star_left: star_density(left, p_star),
        rho_star_right: star_density(right, p_star),
        left_wave: kind(left),
        right_wave: kind(right),
    })
}

/// Head and tail speeds of the two nonlinear waves; equal for shocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveSpeeds {
    pub left_head: f64,
    pub left_tail: f64,
    pub right_tail: f64,
    pub right_head: f64,
}

fn shock_speed(s: &RiemannState, p_star: f64, sign: f64) -> f64 {
    let g = s.mat.gamma();
    let ratio = (p_star + s.mat.pi()) / s.p_bar();
    s.u + sign * s.sound_speed() * ((g + 1.0) / (2.0 * g) * ratio + (g - 1.0) / (2.0 * g)).sqrt()
}

fn star_sound_speed(s: &RiemannState, p_star: f64) -> f64 {
    let g = s.mat.gamma();
    s.sound_speed() * ((p_star + s.mat.pi()) / s.p_bar()).powf((g - 1.0) / (2.0 * g))
}

pub fn wave_speeds(left: &RiemannState, right: &RiemannState, star: &StarState) -> WaveSpeeds {
    let (left_head, left_tail) = match star.left_wave {
        WaveKind::Shock => {
            let s = shock_speed(left, star.p_star, -1.0);
            (s, s)
        }
        WaveKind::Rarefaction => (
            left.u - left.sound_speed(),
            star.u_star - star_sound_speed(left, star.p_star),
        ),
    };
    let (right_tail, right_head) = match star.right_wave {
        WaveKind::Shock => {
            let s = shock_speed(right, star.p_star, 1.0);
            (s, s)
        }
        WaveKind::Rarefaction => (
            star.u_star + star_sound_speed(right, star.p_star),
            right.u + right.sound_speed(),
        ),
    };
    WaveSpeeds {
        left_head,
        left_tail,
        right_tail,
        right_head,
    }
}

/// Primitive state `(rho, u, p)` at similarity coordinate `xi = x / t`.
pub fn sample(
    left: &RiemannState,
    right: &RiemannState,
    star: &StarState,
    xi: f64,
) -> (f64, f64, f64) {
    let w = wave_speeds(left, right, star);
    if xi < star.u_star {
        if xi < w.left_head {
            (left.rho, left.u, left.p)
        } else if xi >= w.left_tail {
            (star.rho_star_left, star.u_star, star.p_star)
        } else {
            let g = left.mat.gamma();
            let c = left.sound_speed();
            let k = 2.0 / (g + 1.0) + (g - 1.0) / ((g + 1.0) * c) * (left.u - xi);
            let rho = left.rho * k.powf(2.0 / (g - 1.0));
            let u = 2.0 / (g + 1.0) * (c + 0.5 * (g - 1.0) * left.u + xi);
            let p = left.p_bar() * k.powf(2.0 * g / (g - 1.0)) - left.mat.pi();
            (rho, u, p)
        }
    } else if xi > w.right_head {
        (right.rho, right.u, right.p)
    } else if xi <= w.right_tail {
        (star.rho_star_right, star.u_star, star.p_star)
    } else {
        let g = right.mat.gamma();
        let c = right.sound_speed();
        let k = 2.0 / (g + 1.0) - (g - 1.0) / ((g + 1.0) * c) * (right.u - xi);
        let rho = right.rho * k.powf(2.0 / (g - 1.0));
        let u = 2.0 / (g + 1.0) * (-c + 0.5 * (g - 1.0) * right.u + xi);
        let p = right.p_bar() * k.powf(2.0 * g / (g - 1.0)) - right.mat.pi();
        (rho, u, p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ideal(rho: f64, u: f64, p: f64, g: f64) -> RiemannState {
        RiemannState::new(rho, u, p, MaterialParams::ideal(g).unwrap()).unwrap()
    }

    /// Plain bisection on the pressure function.
    fn bisect(l: &RiemannState, r: &RiemannState) -> f64 {
        let f = |p: f64| side_function(l, p).0 + side_function(r, p).0 + r.u - l.u;
        let (mut a, mut b) = (1e-10, 1e4);
        for _ in 0..300 {
            let m = 0.5 * (a + b);
            if f(m) > 0.0 {
                b = m;
            } else {
                a = m;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn equal_states() {
        let s = ideal(1.0, 0.3, 2.0, 1.4);
        let star = solve_star(&s, &s).unwrap();
        assert_eq!(star.p_star, 2.0);
        assert_eq!(star.u_star, 0.3);
        assert_eq!(star.rho_star_left, 1.0);
    }

    #[test]
    fn sod_star_state() {
        let (l, r) = (ideal(1.0, 0.0, 1.0, 1.4), ideal(0.125, 0.0, 0.1, 1.4));
        let star = solve_star(&l, &r).unwrap();
        assert!((star.p_star - bisect(&l, &r)).abs() < 1e-12);
        assert!((star.p_star - 0.30313).abs() < 1e-4);
        assert!((star.u_star - 0.92745).abs() < 1e-4);
        assert_eq!(star.left_wave, WaveKind::Rarefaction);
        assert_eq!(star.right_wave, WaveKind::Shock);
    }

    #[test]
    fn two_material_matches_bisection() {
        let l = ideal(1.0, 0.0, 1.0, 1.6);
        let r = ideal(0.125, 0.0, 0.1, 1.2);
        let star = solve_star(&l, &r).unwrap();
        assert!((star.p_star - bisect(&l, &r)).abs() < 1e-12);
    }

    #[test]
    fn stiff_liquid_into_gas() {
        let l =
            RiemannState::new(1000.0, 0.0, 1e9, MaterialParams::new(4.4, 6e8, 0).unwrap()).unwrap();
        let r = ideal(50.0, 0.0, 1e5, 1.4);
        let star = solve_star(&l, &r).unwrap();
        let f = side_function(&l, star.p_star).0 + side_function(&r, star.p_star).0;
        assert!(f.abs() < 1e-9 * star.u_star.abs());
        assert!(star.p_star + 6e8 > 0.0 && star.p_star > 0.0);
    }

    #[test]
    fn mirror_symmetry() {
        let (l, r) = (ideal(1.0, 0.75, 1.0, 1.4), ideal(0.125, -0.2, 0.1, 1.6));
        let a = solve_star(&l, &r).unwrap();
        let ml = RiemannState { u: -r.u, ..r };
        let mr = RiemannState { u: -l.u, ..l };
        let b = solve_star(&ml, &mr).unwrap();
        assert!((a.p_star - b.p_star).abs() <= 1e-13 * a.p_star);
        assert!((a.u_star + b.u_star).abs() <= 1e-13 * a.u_star.abs().max(1.0));
        assert!((a.rho_star_left - b.rho_star_right).abs() <= 1e-12 * a.rho_star_left);
    }

    #[test]
    fn galilean_shift() {
        let (l, r) = (ideal(1.0, 0.0, 1.0, 1.4), ideal(0.125, 0.0, 0.1, 1.4));
        let a = solve_star(&l, &r).unwrap();
        let w = 3.5;
        let b = solve_star(
            &RiemannState { u: l.u + w, ..l },
            &RiemannState { u: r.u + w, ..r },
        )
        .unwrap();
        assert!((b.u_star - a.u_star - w).abs() <= 1e-13 * w);
        assert!((b.p_star - a.p_star).abs() <= 1e-13 * a.p_star);
    }

    #[test]
    fn vacuum_detected() {
        let (l, r) = (ideal(1.0, -20.0, 0.4, 1.4), ideal(1.0, 20.0, 0.4, 1.4));
        assert_eq!(solve_star(&l, &r).unwrap_err(), RiemannError::Vacuum);
    }

    #[test]
    fn sample_limits_and_contact() {
        let (l, r) = (ideal(1.0, 0.0, 1.0, 1.4), ideal(0.125, 0.0, 0.1, 1.4));
        let star = solve_star(&l, &r).unwrap();
        assert_eq!(sample(&l, &r, &star, -1e6), (1.0, 0.0, 1.0));
        assert_eq!(sample(&l, &r, &star, 1e6), (0.125, 0.0, 0.1));
        let below = sample(&l, &r, &star, star.u_star - 1e-12);
        let above = sample(&l, &r, &star, star.u_star);
        assert_eq!(below.0, star.rho_star_left);
        assert_eq!(above.0, star.rho_star_right);
        assert_eq!((below.1, below.2), (above.1, above.2));
    }

    #[test]
    fn fan_is_continuous_and_isentropic() {
        let (l, r) = (ideal(1.0, 0.0, 1.0, 1.4), ideal(0.125, 0.0, 0.1, 1.4));
        let star = solve_star(&l, &r).unwrap();
        let w = wave_speeds(&l, &r, &star);
        let head = sample(&l, &r, &star, w.left_head + 1e-13);
        let tail = sample(&l, &r, &star, w.left_tail - 1e-13);
        assert!((head.0 - 1.0).abs() < 1e-10);
        assert!((tail.0 - star.rho_star_left).abs() < 1e-10);
        assert!((tail.2 - star.p_star).abs() < 1e-10);
        let s0 = l.p / l.rho.powf(1.4);
        for k in 1..100 {
            let xi = w.left_head + (w.left_tail - w.left_head) * k as f64 / 100.0;
            let (rho, _, p) = sample(&l, &r, &star, xi);
            assert!((p / rho.powf(1.4) - s0).abs() <= 1e-10 * s0);
        }
    }
}
