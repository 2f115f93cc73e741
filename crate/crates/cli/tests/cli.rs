use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use serde_json::{json, Value};

/// Serves POST requests on a random port; returns the URL and a hit counter.
fn mock_server(handler: impl Fn(Value) -> (u16, Value) + Send + 'static) -> (String, Arc<AtomicUsize>) {
    let server = tiny_http::Server::http("127.0.0.1:0").unwrap();
    let url = format!("http://{}/", server.server_addr().to_ip().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    thread::spawn(move || {
        for mut request in server.incoming_requests() {
            counter.fetch_add(1, Ordering::SeqCst);
            let mut body = String::new();
            request.as_reader().read_to_string(&mut body).unwrap();
            let (status, reply) = handler(serde_json::from_str(&body).unwrap_or(Value::Null));
            let header = tiny_http::Header::from_bytes("Content-Type", "application/json").unwrap();
            let response = tiny_http::Response::from_string(reply.to_string())
                .with_status_code(status)
                .with_header(header);
            let _ = request.respond(response);
        }
    });
    (url, hits)
}

fn completions_server() -> (String, Arc<AtomicUsize>) {
    mock_server(|body| {
        let prompt = body["prompt"].as_str().unwrap_or_default();
        let text = format!(
            " police secure the area\n2. victims are treated {}\n3. investigators collect evidence\n",
            prompt.len()
        );
        (200, json!({"choices": [{"text": text}]}))
    })
}

fn entailment_server() -> (String, Arc<AtomicUsize>) {
    mock_server(|body| {
        let scores: Vec<Value> = body["pairs"]
            .as_array()
            .unwrap()
            .iter()
            .map(|p| {
                if p["premise"] == p["hypothesis"] {
                    json!({"p_entail": 1.0, "p_neutral": 0.0, "p_contra": 0.0})
                } else {
                    json!({"p_entail": 0.0, "p_neutral": 1.0, "p_contra": 0.0})
                }
            })
            .collect();
        (200, json!({ "scores": scores }))
    })
}

fn write_config(dir: &Path, generation_url: &str, entailment_url: &str, extra: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(
        &path,
        format!(
            r#"
[[domains]]
id = "bombing-attacks"
display_name = "bombing attacks"

[generation]
endpoint_url = "{generation_url}"
model_name = "text-davinci-003"
max_retries = 2
retry_base_delay_ms = 1

[entailment]
endpoint_url = "{entailment_url}"
{extra}
"#
        ),
    )
    .unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_schemadraft"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((
                    path.strip_prefix(dir).unwrap().display().to_string(),
                    fs::read(&path).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

fn gold_file(dir: &Path, name: &str, events: &[&str]) -> PathBuf {
    let events: Vec<Value> = events
        .iter()
        .enumerate()
        .map(|(i, t)| json!({"index": i, "text": t}))
        .collect();
    let schema = json!({
        "domain": {"id": "bombing-attacks", "display_name": "bombing attacks"},
        "source": {"kind": "gold", "dataset_or_model": name},
        "events": events,
    });
    let path = dir.join(format!("{name}.json"));
    fs::write(&path, serde_json::to_string_pretty(&schema).unwrap()).unwrap();
    path
}

#[test]
fn union_generation_then_warm_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let (gen_url, gen_hits) = completions_server();
    let config = write_config(dir.path(), &gen_url, "http://127.0.0.1:9/", "");
    let out = dir.path().join("schemas");
    let args = [
        "generate",
        "--config",
        config.to_str().unwrap(),
        "--domain",
        "bombing-attacks",
        "--mode",
        "union",
        "--out",
        out.to_str().unwrap(),
    ];
    let first = run(&args);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    assert_eq!(stdout(&first).lines().count(), 10);
    assert_eq!(gen_hits.load(Ordering::SeqCst), 9);
    let before = snapshot(&out);

    let second = run(&args);
    assert!(second.status.success());
    assert_eq!(
        gen_hits.load(Ordering::SeqCst),
        9,
        "warm cache must not call the provider"
    );
    assert_eq!(snapshot(&out), before);
}

#[test]
fn unknown_domain_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "http://127.0.0.1:9/", "http://127.0.0.1:9/", "");
    let o = run(&["generate", "--config", config.to_str().unwrap(), "--domain", "flood"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown domain"));
}

#[test]
fn persistent_server_errors_exit_with_transport_code() {
    let dir = tempfile::tempdir().unwrap();
    let (url, hits) = mock_server(|_| (500, json!({"error": "overloaded"})));
    let config = write_config(
        dir.path(),
        &url,
        "http://127.0.0.1:9/",
        "\n[sampling]\nnum_samples = 1\n",
    );
    let o = run(&[
        "generate",
        "--config",
        config.to_str().unwrap(),
        "--domain",
        "bombing-attacks",
    ]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(hits.load(Ordering::SeqCst), 3, "one attempt plus two retries");
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("prompt temporal"), "{stderr}");
}

#[test]
fn client_errors_are_not_retried() {
    let dir = tempfile::tempdir().unwrap();
    let (url, hits) = mock_server(|_| (400, json!({"error": "bad request"})));
    let config = write_config(
        dir.path(),
        &url,
        "http://127.0.0.1:9/",
        "\n[sampling]\nnum_samples = 1\n",
    );
    let o = run(&[
        "generate",
        "--config",
        config.to_str().unwrap(),
        "--domain",
        "bombing-attacks",
    ]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(hits.load(Ordering::SeqCst), 1);
}

#[test]
fn evaluate_over_http_entailment() {
    let dir = tempfile::tempdir().unwrap();
    let (gen_url, _) = completions_server();
    let (nli_url, nli_hits) = entailment_server();
    let config = write_config(dir.path(), &gen_url, &nli_url, "");
    let schemas = dir.path().join("schemas");
    let g = run(&[
        "generate",
        "--config",
        config.to_str().unwrap(),
        "--domain",
        "bombing-attacks",
        "--out",
        schemas.to_str().unwrap(),
    ]);
    assert!(g.status.success());
    let preds: Vec<String> = stdout(&g).lines().map(str::to_string).collect();
    assert_eq!(preds.len(), 3);
    let gold = gold_file(
        dir.path(),
        "curated",
        &[
            "police secure the area",
            "investigators collect evidence",
            "a memorial is held",
        ],
    );

    let evaluate = |direction: &str, out: &Path| {
        let mut args = vec![
            "evaluate".to_string(),
            "--config".into(),
            config.display().to_string(),
            "--gold".into(),
            gold.display().to_string(),
            "--direction".into(),
            direction.into(),
            "--out".into(),
            out.display().to_string(),
            "--pred".into(),
        ];
        args.extend(preds.iter().cloned());
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        run(&refs)
    };
    let any_dir = dir.path().join("any");
    let o = evaluate("any-directional", &any_dir);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("0.6667±0.0000\tn=3"), "{}", stdout(&o));
    let reports = fs::read_dir(any_dir.join("reports")).unwrap().count();
    assert_eq!(reports, 3);
    for table in ["recall.md", "recall.csv", "recall.json", "style.md", "summary.json"] {
        assert!(any_dir.join(table).exists(), "{table}");
    }
    let calls = nli_hits.load(Ordering::SeqCst);
    assert!(calls > 0);

    let bi_dir = dir.path().join("bi");
    assert!(evaluate("bidirectional", &bi_dir).status.success());
    let summary = |d: &Path| -> f64 {
        let v: Value = serde_json::from_str(&fs::read_to_string(d.join("summary.json")).unwrap()).unwrap();
        v[0]["summary"]["mean"].as_f64().unwrap()
    };
    assert!(summary(&bi_dir) <= summary(&any_dir));
    assert_eq!(
        nli_hits.load(Ordering::SeqCst),
        calls,
        "second run is served from the pair cache"
    );
}

#[test]
fn evaluate_missing_gold_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "http://127.0.0.1:9/", "http://127.0.0.1:9/", "");
    let pred = gold_file(dir.path(), "p", &["x"]);
    let o = run(&[
        "evaluate",
        "--config",
        config.to_str().unwrap(),
        "--gold",
        dir.path().join("missing.json").to_str().unwrap(),
        "--pred",
        pred.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.json"));
}

fn mock_config(dir: &Path) -> PathBuf {
    let path = dir.join("mock.toml");
    fs::write(
        &path,
        r#"
[[domains]]
id = "bombing-attacks"
display_name = "bombing attacks"

[generation]
backend = "echo"
model_name = "echo"

[entailment]
backend = "exact-match"
"#,
    )
    .unwrap();
    path
}

#[test]
fn overlap_identical_disjoint_and_missing() {
    let dir = tempfile::tempdir().unwrap();
    let config = mock_config(dir.path());
    let a = gold_file(dir.path(), "a", &["x happens", "y happens"]);
    let a2 = gold_file(dir.path(), "a2", &["x happens", "y happens"]);
    let b = gold_file(dir.path(), "b", &["z happens"]);
    let cfg = config.to_str().unwrap();
    let same = run(&[
        "overlap",
        "--config",
        cfg,
        "--a",
        a.to_str().unwrap(),
        "--b",
        a2.to_str().unwrap(),
    ]);
    assert_eq!(stdout(&same), "a_given_b\t1\nb_given_a\t1\n");
    let disjoint = run(&[
        "overlap",
        "--config",
        cfg,
        "--a",
        a.to_str().unwrap(),
        "--b",
        b.to_str().unwrap(),
    ]);
    assert_eq!(stdout(&disjoint), "a_given_b\t0\nb_given_a\t0\n");
    let missing = run(&[
        "overlap",
        "--config",
        cfg,
        "--a",
        a.to_str().unwrap(),
        "--b",
        "/nonexistent.json",
    ]);
    assert_eq!(missing.status.code(), Some(3));
}

#[test]
fn agreement_sampling_and_import() {
    let dir = tempfile::tempdir().unwrap();
    let config = mock_config(dir.path());
    let texts: Vec<String> = (0..300).map(|i| format!("event number {i} occurs")).collect();
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    let gold = gold_file(dir.path(), "gold", &refs);
    let reports = dir.path().join("run");
    let e = run(&[
        "evaluate",
        "--config",
        config.to_str().unwrap(),
        "--gold",
        gold.to_str().unwrap(),
        "--pred",
        gold.to_str().unwrap(),
        "--out",
        reports.to_str().unwrap(),
    ]);
    assert!(e.status.success(), "{}", String::from_utf8_lossy(&e.stderr));

    let sample = |out: &Path| {
        run(&[
            "agreement",
            "--reports",
            reports.to_str().unwrap(),
            "--sample",
            "216",
            "--seed",
            "7",
            "--out",
            out.to_str().unwrap(),
        ])
    };
    let (s1, s2) = (dir.path().join("s1"), dir.path().join("s2"));
    assert!(sample(&s1).status.success());
    assert!(sample(&s2).status.success());
    let csv1 = fs::read_to_string(s1.join("pairs.csv")).unwrap();
    assert_eq!(csv1.lines().count(), 217);
    assert_eq!(csv1, fs::read_to_string(s2.join("pairs.csv")).unwrap());
    assert!(csv1.starts_with("pair_id,domain,gold_event,predicted_event\n"));

    let perfect = dir.path().join("perfect.csv");
    let mut body = String::from("pair_id,annotator_id,judgment\n");
    for (i, line) in csv1.lines().skip(1).take(20).enumerate() {
        let id = line.split(',').next().unwrap();
        for annotator in ["a1", "a2", "a3"] {
            body.push_str(&format!("{id},{annotator},{}\n", i % 2));
        }
    }
    fs::write(&perfect, body).unwrap();
    let imported = run(&[
        "agreement",
        "--import",
        perfect.to_str().unwrap(),
        "--out",
        dir.path().join("agree").to_str().unwrap(),
    ]);
    assert!(
        imported.status.success(),
        "{}",
        String::from_utf8_lossy(&imported.stderr)
    );
    assert!(stdout(&imported).contains("krippendorff_alpha\t1\n"));
    assert!(dir.path().join("agree/agreement.md").exists());

    let even = dir.path().join("even.csv");
    fs::write(&even, "pair_id,annotator_id,judgment\np1,a1,1\np1,a2,0\n").unwrap();
    let o = run(&[
        "agreement",
        "--import",
        even.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "pair_id,annotator_id,judgment\np1,a1,1\np1,a2,yes\n").unwrap();
    let o = run(&[
        "agreement",
        "--import",
        bad.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(
        String::from_utf8_lossy(&o.stderr).contains("line 3"),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}
