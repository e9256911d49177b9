use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hdial"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"))
        .join("cli")
        .join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn small_config(dir: &std::path::Path) -> PathBuf {
    let path = dir.join("small.toml");
    std::fs::write(
        &path,
        "n_train_dialogues = 40\neval_every = 20\neval_dialogues_per_point = 10\npretrain_dialogues = 20\nseeds = [1]\n",
    )
    .unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn chat(args: &[&str], input: &str) -> Output {
    let mut child = bin()
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(input.as_bytes())
        .unwrap();
    child.wait_with_output().unwrap()
}

fn text(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["train", "--mode", "sideways"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn unknown_config_key_exits_with_one() {
    let dir = scratch("badcfg");
    let cfg = dir.join("bad.toml");
    std::fs::write(&cfg, "n_train_dialogs = 10\n").unwrap();
    let out = run(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_train_dialogs"));
}

#[test]
fn train_evaluate_and_chat() {
    let dir = scratch("train");
    let cfg = small_config(&dir);
    let out = dir.join("run");
    let args = [
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--quiet",
    ];
    let o = run(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(text(&o).is_empty());

    let curve = std::fs::read_to_string(out.join("curve-seed1.csv")).unwrap();
    assert_eq!(curve.lines().count(), 4, "{curve}");
    let manifest = std::fs::read_to_string(out.join("manifest.toml")).unwrap();
    assert!(manifest.contains("dictionary_cap = 1000"));
    assert!(manifest.contains("n_train_dialogues = 40"));
    assert!(out.join("curves.gp").exists());

    // Same config and seed, same bytes.
    let again = dir.join("again");
    let o = run(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        again.to_str().unwrap(),
        "--quiet",
    ]);
    assert!(o.status.success());
    assert_eq!(
        std::fs::read(again.join("curve-seed1.csv")).unwrap(),
        curve.as_bytes()
    );

    let policies = out.join("policies-seed1");
    let before = std::fs::read(policies.join("restaurant.json")).unwrap();
    let o = run(&[
        "evaluate",
        "--policies",
        policies.to_str().unwrap(),
        "--dialogues",
        "5",
        "--seed",
        "3",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(text(&o).contains("seed 3: 5 dialogues"));
    assert_eq!(
        std::fs::read(policies.join("restaurant.json")).unwrap(),
        before
    );

    let o = chat(&["chat", "--policies", policies.to_str().unwrap()], "bye\n");
    assert!(o.status.success());
    assert!(
        text(&o).contains("failure after 1 turns, return -1"),
        "{}",
        text(&o)
    );

    let o = chat(
        &["chat", "--policies", policies.to_str().unwrap()],
        "pls book\nbye\n",
    );
    let t = text(&o);
    assert!(t.contains("request(slot)"), "{t}");
    assert!(t.contains("failure after 1 turns, return -1"), "{t}");

    // Flat policies are not in a hierarchical run's output.
    let o = run(&[
        "evaluate",
        "--policies",
        policies.to_str().unwrap(),
        "--mode",
        "flat",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn adapt_saved_masters() {
    let dir = scratch("adapt");
    let config = hdial::config::ExperimentConfig {
        pretrain_dialogues: 20,
        ..Default::default()
    };
    let world = hdial::world::World::builtin(config.world_seed).unwrap();
    let pretrained = dir.join("pretrained");
    hdial::harness::pretrain_masters(&world, &config, 1)
        .unwrap()
        .save_dir(&pretrained)
        .unwrap();
    let out = dir.join("adapted");
    let o = run(&[
        "adapt",
        "--policies",
        pretrained.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for d in ["restaurant", "hotel", "booking", "payment"] {
        assert!(
            out.join("policies").join(format!("{d}.json")).exists(),
            "{d}"
        );
    }
}

#[test]
fn gen_db_round_trips_through_world_flag() {
    let dir = scratch("gendb");
    let o = run(&["gen-db", "--seed", "11", "--out", dir.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(text(&o).contains("venues"));
    let world = dir.join("world.json");
    let cfg = small_config(&dir);
    let out = dir.join("run");
    let o = run(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--world",
        world.to_str().unwrap(),
        "--mode",
        "flat",
        "--out",
        out.to_str().unwrap(),
        "--quiet",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("policies-seed1/restaurant-flat.json").exists());
    assert!(out.join("policies-seed1/hotel-flat.json").exists());
}
