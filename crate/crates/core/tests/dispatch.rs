use esg_core::cluster_sim::{ClusterState, World};
use esg_core::dispatch::{home_invoker, AfwQueues, Controller, Policy, QueuedJob, SchedulerParams};
use esg_core::model::Configuration;
use esg_core::scenario::{AppSpec, Scenario};

const NODES: usize = 4;

fn world() -> (World, SchedulerParams) {
    let mut s = Scenario { name: "dispatch".into(), ..Scenario::default() };
    s.apps = vec![AppSpec { id: "app".into(), functions: vec!["deblur".into()], edges: None, slo_ms: None }];
    s.workload.arrivals = Some(Vec::new());
    (s.prepare().unwrap().world, s.scheduler)
}

fn job(job: usize, pred_node: Option<usize>) -> QueuedJob {
    QueuedJob { job, instance: job, instance_arrival_ms: 0.0, enqueued_ms: 0.0, pred_node }
}

fn full_cluster() -> ClusterState {
    let mut c = ClusterState::new(NODES, 16, 7);
    for n in 0..NODES {
        c.reserve(n, Configuration::new(1, 16, 7));
    }
    c
}

#[test]
fn busy_cluster_defers_then_forces_minimum_config() {
    let (world, params) = world();
    let home = home_invoker("app", "deblur", NODES);
    let mut ctl = Controller::new(Policy::new(params, &world, 0.1).unwrap(), &world);
    let mut queues = AfwQueues::default();
    queues.push((0, 0), job(0, None));
    let mut cluster = full_cluster();

    let out = ctl.tick(&world, &mut queues, &mut cluster, 0.0).unwrap();
    assert!(out.is_empty());
    assert_eq!(ctl.recheck().len(), 1);
    assert_eq!(ctl.recheck()[0].rounds_waited, 0);
    let candidates = ctl.recheck()[0].candidates.clone();
    assert!(!candidates.is_empty());

    // Room for the minimum configuration only, away from the home node.
    let (small, large) = ((home + 1) % NODES, (home + 2) % NODES);
    cluster.release(small, Configuration::new(1, 1, 1));
    cluster.release(large, Configuration::new(1, 1, 2));
    assert!(candidates.iter().all(|c| c.vcpus > 1), "{candidates:?}");

    for round in 1..3 {
        let out = ctl.tick(&world, &mut queues, &mut cluster, round as f64 * 10.0).unwrap();
        assert!(out.is_empty(), "round {round}");
        assert_eq!(ctl.recheck()[0].rounds_waited, round);
    }
    let out = ctl.tick(&world, &mut queues, &mut cluster, 30.0).unwrap();
    assert_eq!(out.len(), 1);
    let launch = &out[0];
    assert!(launch.forced);
    assert_eq!((launch.config, launch.node), (Configuration::MIN, large));
    assert!(ctl.recheck().is_empty());
    assert_eq!(queues.pending(), 0);
    assert_eq!((cluster.free_vcpus(large), cluster.free_vgpus(large)), (0, 1));
}

#[test]
fn prefers_predecessor_node_then_home() {
    let (world, params) = world();
    let home = home_invoker("app", "deblur", NODES);
    let mut ctl = Controller::new(Policy::new(params, &world, 0.1).unwrap(), &world);
    let mut cluster = ClusterState::new(NODES, 16, 7);

    let mut queues = AfwQueues::default();
    queues.push((0, 0), job(0, None));
    let out = ctl.tick(&world, &mut queues, &mut cluster, 0.0).unwrap();
    assert_eq!(out[0].node, home);

    let pred = (home + 3) % NODES;
    queues.push((0, 0), job(1, Some(pred)));
    let out = ctl.tick(&world, &mut queues, &mut cluster, 10.0).unwrap();
    assert_eq!(out[0].node, pred);
    assert!(!out[0].warm);
}

#[test]
fn queue_drains_in_fifo_order() {
    let (world, params) = world();
    let mut ctl = Controller::new(Policy::new(params, &world, 0.1).unwrap(), &world);
    let mut cluster = ClusterState::new(NODES, 16, 7);
    let mut queues = AfwQueues::default();
    for j in 0..7 {
        queues.push((0, 0), job(j, None));
    }
    let out = ctl.tick(&world, &mut queues, &mut cluster, 0.0).unwrap();
    let order: Vec<usize> = out.iter().flat_map(|l| l.jobs.iter().map(|j| j.job)).collect();
    assert_eq!(order, (0..7).collect::<Vec<_>>());
    for l in &out {
        assert_eq!(l.config.batch as usize, l.jobs.len());
        assert!(l.config.batch as usize <= l.queue_len);
    }
}
