use super::state::{euler_flux, GasModel, Primitive};
use super::SolverError;

/// HLLC numerical flux with Einfeldt (Roe-averaged) signal speeds.
pub fn hllc_flux(left: Primitive, right: Primitive, gas: &GasModel) -> Result<[f64; 3], SolverError> {
    if left == right {
        return Ok(euler_flux(left, gas));
    }
    let g = gas.gamma;
    let el = gas.total_energy(left.rho, left.u, left.p);
    let er = gas.total_energy(right.rho, right.u, right.p);
    let al = gas.sound_speed(left.rho, left.p);
    let ar = gas.sound_speed(right.rho, right.p);

    let sl_rho = left.rho.sqrt();
    let sr_rho = right.rho.sqrt();
    let denom = sl_rho + sr_rho;
    let u_roe = (sl_rho * left.u + sr_rho * right.u) / denom;
    let h_l = (el + left.p) / left.rho;
    let h_r = (er + right.p) / right.rho;
    let h_roe = (sl_rho * h_l + sr_rho * h_r) / denom;
    let a_roe = ((g - 1.0) * (h_roe - 0.5 * u_roe * u_roe)).sqrt();

    let s_l = (left.u - al).min(u_roe - a_roe);
    let s_r = (right.u + ar).max(u_roe + a_roe);
    if !s_l.is_finite() || !s_r.is_finite() {
        return Err(SolverError::WaveSpeed);
    }

    let fl = euler_flux(left, gas);
    if s_l >= 0.0 {
        return Ok(fl);
    }
    let fr = euler_flux(right, gas);
    if s_r <= 0.0 {
        return Ok(fr);
    }

    let ml = left.rho * (s_l - left.u);
    let mr = right.rho * (s_r - right.u);
    let s_star = (right.p - left.p + left.u * ml - right.u * mr) / (ml - mr);
    if !s_star.is_finite() {
        return Err(SolverError::WaveSpeed);
    }

    let star = |s: Primitive, e: f64, sk: f64, f: [f64; 3]| -> [f64; 3] {
        let coef = s.rho * (sk - s.u) / (sk - s_star);
        let u_star = [
            coef,
            coef * s_star,
            coef * (e / s.rho + (s_star - s.u) * (s_star + s.p / (s.rho * (sk - s.u)))),
        ];
        let u_k = [s.rho, s.rho * s.u, e];
        [
            f[0] + sk * (u_star[0] - u_k[0]),
            f[1] + sk * (u_star[1] - u_k[1]),
            f[2] + sk * (u_star[2] - u_k[2]),
        ]
    };

    if s_star >= 0.0 {
        Ok(star(left, el, s_l, fl))
    } else {
        Ok(star(right, er, s_r, fr))
    }
}
