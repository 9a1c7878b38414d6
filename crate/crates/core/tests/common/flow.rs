//! The scripted CLI flow whose outputs are pinned under `tests/golden`.

use std::path::{Path, PathBuf};

use ocuverify::cli::{self, model_file_name};
use ocuverify::neuralnet::ModelTag;

use super::noise_splice;

pub const RUN_CONFIG: &str = "\
# small network so the whole flow runs in seconds
input_side = 32
conv_blocks = 8x3x2,16x3x2
embedding_dim = 16
epochs = 2
augment_copies = 2
eval_copies = 2
train_fraction = 0.5
timestamp = 1700000000
";

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn ocv(args: &[&str]) -> Run {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("ocuverify").chain(args.iter().copied());
    let code = cli::run(argv, &mut out, &mut err);
    Run { code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

pub fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

fn ok(r: Run, what: &str) -> Result<Run, String> {
    if r.code == 0 {
        Ok(r)
    } else {
        Err(format!("{what} exited {}: {}", r.code, r.stderr.trim()))
    }
}

/// Synthesizes six identities, preprocesses them and trains all three
/// variants into `root/models`. Returns the config file path.
pub fn build_flow(root: &Path) -> Result<PathBuf, String> {
    let cfg = root.join("run.cfg");
    std::fs::write(&cfg, RUN_CONFIG).map_err(|e| e.to_string())?;
    let raw = root.join("raw");
    ok(ocv(&["synth", "--out", p(&raw), "--identities", "6", "--canvas", "64"]), "synth")?;
    let pp = root.join("pp");
    ok(ocv(&["--config", p(&cfg), "preprocess", "--in", p(&raw), "--out", p(&pp)]), "preprocess")?;
    let manifest = pp.join("manifest.csv");
    for tag in ModelTag::ALL {
        let model = root.join("models").join(model_file_name(tag));
        let loss = root.join(format!("{}.loss.csv", tag.to_string().to_lowercase()));
        let variant = format!("variant={tag}");
        let args = [
            "--config",
            p(&cfg),
            "--set",
            &variant,
            "train",
            "--manifest",
            p(&manifest),
            "--out",
            p(&model),
            "--loss-csv",
            p(&loss),
        ];
        ok(ocv(&args), "train")?;
    }
    Ok(cfg)
}

/// Runs the rest of the flow on top of `build_flow` and returns every pinned
/// output as `(golden file name, content)`.
pub fn flow_outputs(root: &Path, cfg: &Path) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    let manifest = root.join("pp/manifest.csv");
    out.push(("manifest.csv".to_string(), read(&manifest)));
    for tag in ModelTag::ALL {
        let name = format!("{}.loss.csv", tag.to_string().to_lowercase());
        out.push((name.clone(), read(&root.join(&name))));
    }
    out.push(("pre-post.ocv.config".into(), read(&root.join("models/pre-post.ocv.config"))));

    let model = root.join("models/pre-post.ocv");
    let r = ok(ocv(&["--config", p(cfg), "evaluate", "--manifest", p(&manifest), "--model", p(&model)]), "evaluate")?;
    out.push(("evaluate.csv".into(), r.stdout));
    let sweep_csv = root.join("sweep.csv");
    let args = [
        "--config",
        p(cfg),
        "--set",
        "sweep_steps=8",
        "sweep",
        "--manifest",
        p(&manifest),
        "--model",
        p(&model),
        "--out",
        p(&sweep_csv),
    ];
    ok(ocv(&args), "sweep")?;
    out.push(("sweep.csv".into(), read(&sweep_csv)));

    let pre = root.join("raw/id000_PRE.jpg");
    let db = root.join("db.ocdb");
    let models = root.join("models");
    for name in ["verify_fresh.json", "verify_repeat.json"] {
        let args = ["--config", p(cfg), "verify", "--pre", p(&pre), "--post", p(&pre), "--model-dir", p(&models), "--db", p(&db)];
        out.push((name.into(), ok(ocv(&args), "verify")?.stdout));
    }
    out.push(("db_dump.csv".into(), ok(ocv(&["db-dump", "--db", p(&db)]), "db-dump")?.stdout));
    let r = ok(ocv(&["ela", p(&pre), "--out-dir", p(&root.join("ela"))]), "ela")?;
    out.push(("ela_genuine.json".into(), r.stdout));

    let (_, forged, _) = noise_splice(4);
    let f = root.join("forged.jpg");
    std::fs::write(&f, forged).map_err(|e| e.to_string())?;
    let r = ocv(&["--set", "ela_floor=1.0", "ela", p(&f)]);
    if r.code != 2 {
        return Err(format!("ela on the splice exited {}", r.code));
    }
    out.push(("ela_forged.json".into(), r.stdout));
    Ok(out)
}

pub fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

/// Compares against the pinned file, or rewrites it when `UPDATE_GOLDEN` is set.
pub fn check_golden(name: &str, actual: &str) -> Result<(), String> {
    let path = golden_path(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).map_err(|e| e.to_string())?;
        return std::fs::write(&path, actual).map_err(|e| e.to_string());
    }
    let want = std::fs::read_to_string(&path).map_err(|_| format!("missing golden {name}"))?;
    if want == actual {
        Ok(())
    } else {
        Err(format!("golden {name} differs"))
    }
}
