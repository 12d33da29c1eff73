use fejer_core::problems::catalog_instances;
use fejer_core::verify::{run_full_audit, AuditParams, Fault};

#[test]
fn catalog_passes_every_audit() {
    let instances = catalog_instances().unwrap();
    let reports = run_full_audit(&instances, &AuditParams::default(), None);
    for r in &reports {
        println!("{r}");
    }
    let failed: Vec<_> = reports.iter().filter(|r| !r.passed).collect();
    assert!(failed.is_empty(), "{failed:#?}");
    for inst in &instances {
        assert!(reports
            .iter()
            .any(|r| r.instance.as_deref() == Some(inst.name.as_str())));
    }
}

#[test]
fn each_fault_fails_exactly_one_check() {
    let instances = catalog_instances().unwrap();
    let params = AuditParams {
        samples: 500,
        ..AuditParams::default()
    };
    for fault in Fault::ALL {
        let reports = run_full_audit(&instances, &params, Some(fault));
        let failed: Vec<_> = reports.iter().filter(|r| !r.passed).collect();
        assert_eq!(failed.len(), 1, "{fault:?}: {failed:#?}");
        let expected = match fault {
            Fault::SoftThresholdOffByOne => "resolvent_inequality",
            Fault::InflatedModulus => "modulus_soundness",
            Fault::CorruptedGradient => "gradient_finite_difference",
        };
        assert_eq!(failed[0].check, expected);
        assert!(failed[0].witness.is_some());
    }
}
