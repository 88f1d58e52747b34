use std::f64::consts::TAU;

use proptest::prelude::*;
use tcm::config::{parse_config, ConfigError, ForcingId, InitSource, KEYS};
use tcm_core::harness::{MmsFamily, Regime};
use tcm_core::{PhysConsts, Scheme, SystemVariant};

fn err(text: &str) -> ConfigError {
    parse_config(text).unwrap_err()
}

#[test]
fn empty_config_gives_defaults() {
    let c = parse_config("").unwrap();
    assert_eq!(c.grid.n(), 128);
    assert_eq!(c.grid.length(), TAU);
    assert_eq!(c.variant, SystemVariant::PEps { eps: 1e-2 });
    assert_eq!(c.t_end, 1.0);
    assert_eq!(c.consts, PhysConsts::physical());
    assert_eq!(c.forcing, ForcingId::None);
    assert!(matches!(c.init, InitSource::Generated(_)));
    assert_eq!(c.policy.scheme, Scheme::IfRk2);
}

#[test]
fn negative_eta_names_key_and_line() {
    let e = err("# header\n\nvariant.eta = -1\n");
    assert_eq!(e.key, "variant.eta");
    assert_eq!(e.line, 3);
    assert!(e.to_string().contains("variant.eta"));
}

#[test]
fn unknown_keys_and_sections_are_rejected() {
    let e = err("grid.n = 32\ngrid.m = 4\n");
    assert_eq!((e.line, e.key.as_str()), (2, "grid.m"));
    let e = err("[grid]\nn = 32\n[gird]\n");
    assert_eq!((e.line, e.key.as_str()), (3, "gird"));
    let e = err("[run]\ninit.seed = 3\n");
    assert_eq!((e.line, e.key.as_str()), (2, "run.init.seed"));
    assert!(e.message.contains("relative"));
    let e = err("n = 32\n");
    assert_eq!((e.line, e.key.as_str()), (1, "n"));
}

#[test]
fn malformed_and_duplicate_lines() {
    assert_eq!(err("[grid\n").line, 1);
    assert_eq!(err("grid.n 32\n").line, 1);
    assert_eq!(err(" = 3\n").line, 1);
    let e = err("grid.n = 32\n[grid]\nn = 64\n");
    assert_eq!((e.line, e.key.as_str()), (3, "grid.n"));
    assert!(e.message.contains("line 1"));
}

#[test]
fn range_errors_are_located() {
    for (text, key) in [
        ("grid.n = 7", "grid.n"),
        ("grid.n = -4", "grid.n"),
        ("grid.length = 0", "grid.length"),
        ("variant.eps = 0", "variant.eps"),
        ("variant.alpha = 1.5", "variant.alpha"),
        ("variant.kind = other", "variant.kind"),
        ("step.dt = nan", "step.dt"),
        ("step.cfl = 1", "step.cfl"),
        ("step.scheme = euler", "step.scheme"),
        ("consts.q_s = 2", "consts.q_s"),
        ("consts.mu = -1", "consts.mu"),
        ("run.t_end = -1", "run.t_end"),
        ("init.regime = wet", "init.regime"),
        ("sweep.eta_values = 0.1, -0.1", "sweep.eta_values"),
        ("sweep.norm = l3", "sweep.norm"),
        ("twin.component = w", "twin.component"),
        ("mms.resolutions = 16, 9", "mms.resolutions"),
        ("run.forcing = sometimes", "run.forcing"),
    ] {
        let e = err(&format!("\n{text}\n"));
        assert_eq!(e.key, key, "{text}: {e}");
        assert_eq!(e.line, 2, "{text}: {e}");
    }
}

#[test]
fn generator_limits_point_at_the_grid() {
    let e = err("\ngrid.n = 8\n");
    assert_eq!((e.line, e.key.as_str()), (2, "init.kmax"));
    let e = err("grid.n = 8\ninit.kmax = 3\n");
    assert_eq!((e.line, e.key.as_str()), (2, "init.kmax"));
    assert!(parse_config("grid.n = 8\ninit.snapshot = s.tcm\n").is_ok());
}

#[test]
fn sections_and_dotted_keys_agree() {
    let a = parse_config("[variant]\nkind = limit\nalpha = 0.25\n[init]\nregime = mixed\n").unwrap();
    let b = parse_config("variant.kind = limit # trailing comment\nvariant.alpha = 0.25\ninit.regime = \"mixed\"\n").unwrap();
    assert_eq!(a, b);
    assert_eq!(a.variant, SystemVariant::Limit { alpha: 0.25 });
    match a.init {
        InitSource::Generated(spec) => assert_eq!(spec.regime, Regime::Mixed),
        other => panic!("{other:?}"),
    }
}

#[test]
fn preset_overrides_apply_in_any_order() {
    let a = parse_config("consts.q_s = 0.3\nconsts.preset = unit\n").unwrap();
    let mut expected = PhysConsts::unit();
    expected.q_s = 0.3;
    assert_eq!(a.consts, expected);
}

#[test]
fn manufactured_forcing_requires_two_pi_box() {
    let c = parse_config("run.forcing = rational\n").unwrap();
    assert_eq!(c.forcing, ForcingId::Manufactured(MmsFamily::Rational));
    let e = err("grid.length = 3\nrun.forcing = decay\n");
    assert_eq!(e.key, "run.forcing");
}

#[test]
fn every_documented_key_is_accepted() {
    for (key, default) in KEYS {
        if default.starts_with('(') || *default == "preset" {
            continue;
        }
        parse_config(&format!("{key} = {default}\n")).unwrap_or_else(|e| panic!("{key}: {e}"));
    }
}

#[test]
fn sample_config_matches_golden_dump() {
    let text = include_str!("../configs/sample.cfg");
    let dump = format!("{:#?}\n", parse_config(text).unwrap());
    let golden = include_str!("golden/sample_config.txt");
    assert_eq!(dump, golden);
}

proptest! {
    #[test]
    fn parsing_is_total(text in "\\PC*") {
        let _ = parse_config(&text);
    }

    #[test]
    fn parsing_is_total_on_config_like_text(
        lines in prop::collection::vec(
            (prop::sample::select(KEYS.iter().map(|(k, _)| *k).collect::<Vec<_>>()), "[-0-9.e, a-z_]{0,12}"),
            0..6,
        )
    ) {
        let text: String = lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        match parse_config(&text) {
            Ok(_) => {}
            Err(e) => prop_assert!(e.line <= lines.len()),
        }
    }

    #[test]
    fn even_grid_sizes_parse(half in 6usize..200) {
        let c = parse_config(&format!("grid.n = {}", 2 * half)).unwrap();
        prop_assert_eq!(c.grid.n(), 2 * half);
    }
}
