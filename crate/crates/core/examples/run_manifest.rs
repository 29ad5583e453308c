//! Recording a run: arguments, resolved config, inputs, outputs, backends.
//!
//! cargo run -p qagkit --example run_manifest

use qagkit::RunManifest;

fn main() -> qagkit::Result<()> {
    let dir = tempfile::tempdir()?;
    let mut m = RunManifest::start("generate", vec!["--strategy".into(), "end2end".into()], 42);
    m.config("num_beams", 4)
        .config("strategy", "end2end")
        .input("contexts.jsonl")
        .output(dir.path().join("out.jsonl"))
        .backend("mock:fixtures/mock_end2end.json");
    let path = m.finish(dir.path())?;

    let back = RunManifest::load(&path)?;
    println!("{}", std::fs::read_to_string(&path)?);
    assert_eq!(back.seed, 42);
    assert!(back.finished_unix.is_some());
    Ok(())
}
