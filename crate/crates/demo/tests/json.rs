use rslbfgs_demo::{eig_convergence_js, karcher_convergence, karcher_convergence_js, sphere_transport_js};

fn parse(s: &str) -> serde_json::Value {
    serde_json::from_str(s).expect("valid json")
}

#[test]
fn karcher_curves_reach_small_error() {
    let c = karcher_convergence(5, 20, 10.0, 0.75, 10, 3).unwrap();
    assert_eq!(c.curves.len(), 2);
    for curve in &c.curves {
        assert_eq!(curve.passes.len(), curve.error.len());
        assert!(curve.error.last().unwrap() < &1e-6, "{}: {:?}", curve.algorithm, curve.error);
    }
    let v = parse(&karcher_convergence_js(5, 20, 10.0, 0.75, 3, 3));
    assert_eq!(v["problem"], "karcher");
    assert_eq!(v["curves"][0]["algorithm"], "rsv-lbfgs");
}

#[test]
fn eig_json_has_three_curves() {
    for option in [1, 2] {
        let v = parse(&eig_convergence_js(10, 300, 0.2, option, 3, 1));
        let curves = v["curves"].as_array().unwrap();
        assert_eq!(curves.len(), 3);
        assert!(curves.iter().all(|c| c["passes"].as_array().unwrap().len() == c["error"].as_array().unwrap().len()));
    }
    assert!(parse(&eig_convergence_js(10, 5, 0.2, 2, 3, 1))["error"].is_string());
}

#[test]
fn transport_json_shape() {
    let v = parse(&sphere_transport_js(0.3, 1.5, 0.4, 20));
    assert_eq!(v["path"].as_array().unwrap().len(), 21);
    assert_eq!(v["vectors"][0].as_array().unwrap().len(), 3);
}
