use esg_core::model::{enumerate_configs, per_job_cost, synth_exec_time, ConfigGrid, Configuration, FunctionSpec, Pricing, ProfileModel};
use proptest::prelude::*;

fn cfg() -> impl Strategy<Value = Configuration> {
    (1u32..=8, 1u32..=8, 1u32..=4).prop_map(|(b, c, g)| Configuration::new(b, c, g))
}

#[test]
fn default_grid_has_128_configs() {
    let all = enumerate_configs(&ConfigGrid::default()).unwrap();
    assert_eq!(all.len(), 4 * 8 * 4);
}

proptest! {
    #[test]
    fn more_resources_never_slower(c in cfg(), base in 1.0f64..5000.0) {
        let spec = FunctionSpec::new("f", base, 1000.0, 1.0);
        let m = ProfileModel::default();
        let t = synth_exec_time(&spec, c, &m);
        prop_assert!(synth_exec_time(&spec, Configuration::new(c.batch, c.vcpus + 1, c.vgpus), &m) < t);
        prop_assert!(synth_exec_time(&spec, Configuration::new(c.batch, c.vcpus, c.vgpus + 1), &m) < t);
        prop_assert!(synth_exec_time(&spec, Configuration::new(c.batch + 1, c.vcpus, c.vgpus), &m) > t);
        // batching amortizes: per-job time falls with batch size
        let per_job = |b: u32| synth_exec_time(&spec, Configuration::new(b, c.vcpus, c.vgpus), &m) / f64::from(b);
        prop_assert!(per_job(c.batch + 1) < per_job(c.batch));
    }

    #[test]
    fn cost_is_linear_in_time_and_resources(c in cfg(), ms in 0.0f64..1e6, k in 1u32..5) {
        let p = Pricing::default();
        let one = p.resource_cost(c, ms);
        prop_assert!((p.resource_cost(c, k as f64 * ms) - k as f64 * one).abs() <= 1e-12 * one.max(1.0) * k as f64);
        let split = p.resource_cost(Configuration::new(c.batch, c.vcpus, 0), ms) + p.resource_cost(Configuration::new(c.batch, 0, c.vgpus), ms);
        prop_assert!((split - one).abs() <= 1e-12 * one.max(1.0));
        prop_assert!((per_job_cost(c, ms, &p) * f64::from(c.batch) - one).abs() <= 1e-12 * one.max(1.0));
    }
}
