use netcournot_cli::region::RegionReport;
use netcournot_cli::sweep::{read_csv, run_sweep, write_csv, SweepRecord, SweepSpec, SweepStatus};
use netcournot_cli::Instance;
use netcournot_core::equilibrium::{verify_gne, SearchConfig};
use netcournot_core::twonode::TwoNodeParams;
use netcournot_core::Objective;

fn thin_line() -> Instance {
    Instance::load(concat!(env!("CARGO_MANIFEST_DIR"), "/../../instances/thin_line.json")).unwrap()
}

fn sweep(inst: &Instance, objectives: Vec<Objective>) -> (SweepSpec, Vec<SweepRecord>) {
    let spec = SweepSpec {
        from: 0.0,
        to: 1.5,
        steps: 151,
        objectives,
        config: SearchConfig::default(),
    };
    let records = run_sweep(inst, &spec).unwrap();
    (spec, records)
}

fn bits(x: Option<f64>) -> Option<u64> {
    x.map(f64::to_bits)
}

#[test]
fn csv_round_trip_is_bit_exact() {
    let (_, records) = sweep(&thin_line(), Objective::ALL.to_vec());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    write_csv(std::fs::File::create(&path).unwrap(), &["thin line".to_string()], &records).unwrap();
    let back = read_csv(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(back.len(), records.len());
    for (x, y) in records.iter().zip(&back) {
        assert_eq!(x.f12.to_bits(), y.f12.to_bits());
        assert_eq!((x.objective, x.status, &x.note), (y.objective, y.status, &y.note));
        for (u, v) in [
            (x.q1, y.q1),
            (x.q2, y.q2),
            (x.r, y.r),
            (x.w_soc, y.w_soc),
            (x.w_con, y.w_con),
            (x.profit1, y.profit1),
            (x.profit2, y.profit2),
            (x.merch_surplus, y.merch_surplus),
        ] {
            assert_eq!(bits(u), bits(v));
        }
    }
}

#[test]
fn consumer_gaps_match_region_partition() {
    let inst = thin_line();
    let (spec, records) = sweep(&inst, vec![Objective::ConsumerSurplus]);
    let params: TwoNodeParams = inst.two_node_params().unwrap().with_capacity(None).unwrap();
    let region = RegionReport::new(&params, spec.from, spec.to).unwrap();
    let in_gap = |f: f64| region.gaps().any(|g| g.from < f && f < g.to);
    let on_cut = |f: f64| region.intervals.iter().any(|i| (i.from - f).abs() < 1e-9 || (i.to - f).abs() < 1e-9);
    assert!(region.gaps().next().is_some());
    for rec in &records {
        if on_cut(rec.f12) {
            continue;
        }
        assert_eq!(rec.status == SweepStatus::NoGne, in_gap(rec.f12), "f12 = {}", rec.f12);
    }
}

#[test]
fn residual_objective_is_flat_in_capacity() {
    // Equal intercepts make zero re-balancing optimal at every capacity.
    let (_, records) = sweep(&thin_line(), vec![Objective::ResidualSocialWelfare]);
    let first = &records[0];
    for rec in &records {
        assert_eq!(rec.status, SweepStatus::Exists);
        assert!(rec.r.unwrap().abs() <= 1e-12);
        assert!((rec.q1.unwrap() - first.q1.unwrap()).abs() <= 1e-9);
        assert!((rec.w_soc.unwrap() - first.w_soc.unwrap()).abs() <= 1e-9);
    }
}

#[test]
fn social_welfare_grows_with_capacity() {
    let (_, records) = sweep(&thin_line(), vec![Objective::SocialWelfare]);
    for w in records.windows(2) {
        assert!(w[1].w_soc.unwrap() >= w[0].w_soc.unwrap() - 1e-9, "{} -> {}", w[0].f12, w[1].f12);
    }
}

#[test]
fn equilibrium_rows_verify() {
    let inst = thin_line();
    let (_, records) = sweep(&inst, Objective::ALL.to_vec());
    for rec in records.iter().filter(|r| r.status == SweepStatus::Exists) {
        let at = inst.with_capacity(Some(rec.f12)).unwrap();
        let r = rec.r.unwrap();
        let cert = verify_gne(&at.network, &at.market, rec.objective, &[rec.q1.unwrap(), rec.q2.unwrap()], &[r, -r], 1e-7).unwrap();
        assert!(cert.is_gne, "{} at f12 = {}", rec.objective, rec.f12);
    }
}
