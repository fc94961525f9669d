//! Noise-free scans against the real roots of f(r, x) = 0, with stability
//! from the sign of f'(x).

use stochbif::equilibria::{detect_equilibria, ScanConfig, Stability};
use stochbif::fpe::{BoundaryPolicy, DomainSpec};
use stochbif::systems::lookup_builtin;

fn roots(system: &str, r: f64) -> Vec<(f64, Stability)> {
    use Stability::*;
    let kind = |slope: f64| if slope < 0.0 { Stable } else { Unstable };
    let mut v = match system {
        // f' = 2x
        "saddle-node" if r < 0.0 => vec![(-(-r).sqrt(), Stable), ((-r).sqrt(), Unstable)],
        "saddle-node" => vec![],
        // f' = r - 2x
        "transcritical" => vec![(0.0, kind(r)), (r, kind(-r))],
        // f' = r - 3x^2
        "pitchfork" if r <= 0.0 => vec![(0.0, Stable)],
        "pitchfork" => vec![(-r.sqrt(), Stable), (0.0, Unstable), (r.sqrt(), Stable)],
        _ => unreachable!(),
    };
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    v
}

fn config() -> ScanConfig {
    ScanConfig {
        domain: DomainSpec::fixed(-3.0, 3.0, 600, BoundaryPolicy::Reflecting),
        t_final: 60.0,
        dt: 1e-2,
        stride: 100,
        ..ScanConfig::default()
    }
}

#[test]
fn scans_match_closed_form_roots() {
    let cfg = config();
    let tol = 2.0 * cfg.merge_tol;
    for name in ["saddle-node", "transcritical", "pitchfork"] {
        let sys = lookup_builtin(name).unwrap().deterministic();
        for r in [-1.0, -0.5, 0.5, 1.0] {
            let scan = detect_equilibria(&sys, r, &cfg).unwrap();
            let expected = roots(name, r);
            let found: Vec<(f64, Stability)> = scan
                .equilibria
                .iter()
                .map(|e| (e.location, e.stability))
                .collect();
            assert_eq!(
                found.len(),
                expected.len(),
                "{name} r={r}: {found:?} vs {expected:?}"
            );
            for (f, e) in found.iter().zip(&expected) {
                assert!(
                    (f.0 - e.0).abs() < tol,
                    "{name} r={r}: {found:?} vs {expected:?}"
                );
                assert_eq!(f.1, e.1, "{name} r={r}");
            }
        }
    }
}

#[test]
fn escapes_point_the_right_way() {
    let sys = lookup_builtin("saddle-node").unwrap().deterministic();
    let scan = detect_equilibria(&sys, -1.0, &config()).unwrap();
    // everything above the unstable root at +1 runs off to +inf
    for (x0, d) in &scan.escapes {
        assert!(*x0 > 1.0, "{x0}");
        assert_eq!(d.to_string(), "+");
    }
    assert!(!scan.escapes.is_empty());
}
