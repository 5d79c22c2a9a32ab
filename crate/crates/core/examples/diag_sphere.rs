//! Temporary diagnostic: trace replica 8's N=8 system in detail.
use mflab_core::rng::{self, NoiseStream};
use mflab_core::sphere::*;

fn main() {
    let pot = SpherePotential::HeightSquared { alpha: 12.0 };
    let inter = SphereInteraction::new(0.4);
    let (seed, rep) = (1u64, 8u64);
    let (n, m_ref, cap, h) = (8usize, 192usize, 0.4f64, 1e-3f64);
    let steps = 2000usize;

    let mut init = NoiseStream::new(seed, rng::substream_id(rng::role::INIT, rep, 0));
    let mut reference: Vec<SpherePoint> = (0..m_ref).map(|_| cap_point(&mut init, cap)).collect();
    let copies: Vec<SpherePoint> = (0..64).map(|_| cap_point(&mut init, cap)).collect();
    let mut zeta: Vec<SpherePoint> = copies[..n].to_vec();
    let mut xi = zeta.clone();
    let mut ref_streams: Vec<NoiseStream> = (0..m_ref)
        .map(|j| NoiseStream::new(seed, rng::substream_id(rng::role::REFERENCE, rep, j as u64)))
        .collect();
    let mut streams: Vec<NoiseStream> = (0..n)
        .map(|i| NoiseStream::new(seed, rng::substream_id(rng::role::PARTICLE, rep, i as u64)))
        .collect();

    let north = SpherePoint::north();
    for step in 0..steps {
        let mut ref_next = reference.clone();
        for (j, slot) in ref_next.iter_mut().enumerate() {
            let dw = draw_tangent_increment(&mut ref_streams[j], h);
            *slot = step_sphere_langevin(&pot, &inter, &reference, &reference[j], h, &dw, SphereStepMode::Geodesic).unwrap().0;
        }
        let mut new_zeta = zeta.clone();
        let mut new_xi = xi.clone();
        for i in 0..n {
            let dw = draw_tangent_increment(&mut streams[i], h);
            let (e1, e2) = zeta[i].tangent_basis();
            let mut kick = [0.0; 3];
            for a in 0..3 { kick[a] = dw[0] * e1[a] + dw[1] * e2[a]; }
            new_zeta[i] = step_sphere_langevin(&pot, &inter, &reference, &zeta[i], h, &dw, SphereStepMode::Geodesic).unwrap().0;
            let tk = transport(&zeta[i], &xi[i], &kick).unwrap();
            let mut drift = pot.gradient(&xi[i]);
            for a in 0..3 { drift[a] = -drift[a]; }
            for x in &xi {
                let p = inter.drift(x, &xi[i]);
                for a in 0..3 { drift[a] += p[a] / n as f64; }
            }
            let mut vec = [0.0; 3];
            for a in 0..3 { vec[a] = h * drift[a] + tk[a]; }
            new_xi[i] = exp_map(&TangentVector { base: xi[i], vec });
        }
        reference = ref_next;
        zeta = new_zeta;
        xi = new_xi;
        if (step + 1) % 100 == 0 {
            let msr: f64 = zeta.iter().zip(&xi).map(|(a, b)| distance(a, b).powi(2)).sum::<f64>() / n as f64;
            let max_theta_zeta = zeta.iter().map(|p| distance(p, &north)).fold(0.0f64, f64::max);
            let max_theta_xi = xi.iter().map(|p| distance(p, &north)).fold(0.0f64, f64::max);
            let max_theta_ref = reference.iter().map(|p| distance(p, &north)).fold(0.0f64, f64::max);
            let max_rho = zeta.iter().zip(&xi).map(|(a, b)| distance(a, b)).fold(0.0f64, f64::max);
            println!("t={:.2} msr={:.3e} max_rho={:.4} theta(zeta)={:.3} theta(xi)={:.3} theta(ref)={:.3}",
                (step + 1) as f64 * h, msr, max_rho, max_theta_zeta, max_theta_xi, max_theta_ref);
        }
    }
}
