use proptest::prelude::*;

use enskog::collision::{star_stencil, CollisionKernel, CollisionMode, Scheme};
use enskog::diagnostics::free_energy_forms;
use enskog::factor::{occupancy_r, EnskogModel};
use enskog::integrator::transport;
use enskog::sphere::sphere_quadrature;
use enskog::state::{density, maxwellian, Boundary, DistributionField, SpatialGrid, VelocityGrid};

fn field(nx: usize, vg: &VelocityGrid, scale: &[f64], noise: &[f64]) -> DistributionField {
    let env = maxwellian(1.0, [0.1, 0.0, -0.1], 1.0, vg);
    let mut f = DistributionField::zeros(nx, vg.len());
    for j in 0..nx {
        for (k, v) in f.cell_mut(j).iter_mut().enumerate() {
            *v = scale[j] * env[k] * noise[(j * vg.len() + k) % noise.len()];
        }
    }
    f
}

fn kernel(nx: usize, mode: CollisionMode) -> CollisionKernel {
    CollisionKernel::new(
        SpatialGrid::new(4.0, nx, Boundary::Periodic).unwrap(),
        VelocityGrid::new(8, 4.5).unwrap(),
        EnskogModel::van_der_waals(),
        sphere_quadrature(6).unwrap(),
        mode,
        Scheme::Symmetric,
        1.0,
    )
}

fn moments3(f: &[f64], vg: &VelocityGrid) -> [f64; 5] {
    let mut m = [0.0; 5];
    for (k, v) in f.iter().enumerate() {
        let xi = vg.node(k);
        m[0] += v;
        m[1] += v * xi[0];
        m[2] += v * xi[1];
        m[3] += v * xi[2];
        m[4] += v * (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]);
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn star_weights_sum_to_one_and_reproduce_quadratics(u in prop::array::uniform3(0.0f64..7.0)) {
        let vg = VelocityGrid::new(8, 4.5).unwrap();
        let st = star_stencil(&vg, u).unwrap();
        let (nodes, w) = (st.nodes(8), st.weights());
        let at = |k: usize| vg.axis_index(k).map(|i| i as f64);
        let mut acc = [0.0; 5];
        for i in 0..7 {
            let p = at(nodes[i]);
            acc[0] += w[i];
            acc[1] += w[i] * p[0];
            acc[2] += w[i] * p[1];
            acc[3] += w[i] * p[2];
            acc[4] += w[i] * (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
        }
        let want = [1.0, u[0], u[1], u[2], u[0] * u[0] + u[1] * u[1] + u[2] * u[2]];
        for (a, b) in acc.iter().zip(want) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn boltzmann_collisions_conserve_each_cell(noise in prop::collection::vec(0.2f64..1.8, 64)) {
        let k = kernel(2, CollisionMode::Boltzmann);
        let f = field(2, &k.velocity, &[0.1, 0.05], &noise);
        let r = occupancy_r(&density(&f, &k.velocity), &k.space, &k.model).unwrap();
        let out = k.collision_term(&f, &r).unwrap();
        for j in 0..2 {
            let m = moments3(out.j.cell(j), &k.velocity);
            let s = moments3(f.cell(j), &k.velocity);
            let rate = out.rate_scale[j].max(1e-300);
            for c in 0..5 {
                prop_assert!(m[c].abs() < 1e-12 * rate.max(s[c].abs()), "moment {} = {}", c, m[c]);
            }
        }
    }

    #[test]
    fn periodic_enskog_collisions_conserve_globally(noise in prop::collection::vec(0.2f64..1.8, 64), a in 0.02f64..0.2, b in 0.02f64..0.2) {
        let k = kernel(4, CollisionMode::Enskog);
        let f = field(4, &k.velocity, &[a, b, b, a + b], &noise);
        let r = occupancy_r(&density(&f, &k.velocity), &k.space, &k.model).unwrap();
        let out = k.collision_term(&f, &r).unwrap();
        let mut total = [0.0; 5];
        for j in 0..4 {
            let m = moments3(out.j.cell(j), &k.velocity);
            total.iter_mut().zip(m).for_each(|(t, v)| *t += v);
        }
        let rate: f64 = out.rate_scale.iter().sum();
        for (c, v) in total.iter().enumerate() {
            prop_assert!(v.abs() < 1e-12 * rate, "moment {} = {}", c, v);
        }
    }

    #[test]
    fn production_never_exceeds_exchange(noise in prop::collection::vec(0.0f64..2.0, 97), a in 0.02f64..0.2, b in 0.02f64..0.2) {
        let k = kernel(4, CollisionMode::Enskog);
        let f = field(4, &k.velocity, &[a, b, a, b], &noise);
        let r = occupancy_r(&density(&f, &k.velocity), &k.space, &k.model).unwrap();
        let pe = k.production_exchange(&f, &r).unwrap();
        for j in 0..4 {
            prop_assert!(pe.i[j] - pe.d[j] >= -1e-12 * pe.scale[j], "cell {}: D {} I {}", j, pe.d[j], pe.i[j]);
        }
    }

    #[test]
    fn free_energy_forms_agree(noise in prop::collection::vec(0.0f64..3.0, 40), h_c in 0.0f64..0.2, t_w in 0.3f64..3.0) {
        let vg = VelocityGrid::new(8, 4.5).unwrap();
        let f = field(1, &vg, &[0.2], &noise);
        let (x, y) = free_energy_forms(f.cell(0), &vg, h_c, t_w);
        prop_assert!((x - y).abs() <= 1e-10 * x.abs().max(y.abs()));
    }

    #[test]
    fn periodic_transport_keeps_mass_and_positivity(noise in prop::collection::vec(0.0f64..2.0, 50), dt in 0.01f64..0.15) {
        let grid = SpatialGrid::new(4.0, 6, Boundary::Periodic).unwrap();
        let vg = VelocityGrid::new(8, 4.5).unwrap();
        let mut f = field(6, &vg, &[0.1, 0.2, 0.05, 0.3, 0.1, 0.15], &noise);
        let before: f64 = f.values.iter().sum();
        transport(&mut f, &grid, &vg, dt);
        let after: f64 = f.values.iter().sum();
        prop_assert!((after - before).abs() <= 1e-13 * before);
        prop_assert!(f.is_nonnegative());
    }
}
