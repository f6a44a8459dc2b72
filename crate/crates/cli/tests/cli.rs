use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};
use std::time::{Duration, Instant};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chunkstream"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port()
}

const NATURE_MANIFEST: &str = r#"{
  "chunk_duration_s": 0.5,
  "utterances": [
    {"id": "nature", "direction": "en-en", "reference": "Nature can tell us",
     "input": {"script": ["Nature canned", "Nature can not", "Nature can tell a", "Nature can tell us"]}}
  ]
}"#;

#[test]
fn synth_run_report_round() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("toy.json");
    let out = dir.path().join("out");
    assert!(run(&[
        "eval",
        "synth",
        "--n",
        "30",
        "--seed",
        "4",
        "--out",
        p(&manifest)
    ])
    .status
    .success());
    let status = run(&[
        "eval",
        "run",
        "--manifest",
        p(&manifest),
        "--out",
        p(&out),
        "--threads",
        "2",
    ])
    .status;
    assert!(status.success());
    let report = |format: &str| {
        run(&[
            "eval",
            "report",
            "--system",
            p(&out.join("online.jsonl")),
            "--baseline",
            p(&out.join("offline.jsonl")),
            "--label",
            "online",
            "--format",
            format,
        ])
    };
    let tsv = report("tsv");
    assert!(
        tsv.status.success(),
        "{}",
        String::from_utf8_lossy(&tsv.stderr)
    );
    let text = String::from_utf8(tsv.stdout.clone()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("system\tdirection\tutterances\tbleu"));
    assert_eq!(lines.len(), 5, "{text}");
    assert!(lines[4].starts_with("online\tAvg.\t30\t"));
    // Online is never slower than offline, so every gain is non-negative.
    for line in &lines[1..] {
        let gain: f64 = line.split('\t').nth(10).unwrap().parse().unwrap();
        assert!(gain >= 0.0, "{line}");
    }
    assert_eq!(
        report("tsv").stdout,
        tsv.stdout,
        "report is not reproducible"
    );
    let json = String::from_utf8(report("json").stdout).unwrap();
    let last: serde_json::Value = serde_json::from_str(json.lines().last().unwrap()).unwrap();
    assert_eq!(last["direction"], "Avg.");

    // Sequential and threaded runs write identical records apart from timing.
    let seq = dir.path().join("seq");
    assert!(run(&[
        "eval",
        "run",
        "--manifest",
        p(&manifest),
        "--out",
        p(&seq),
        "--threads",
        "1"
    ])
    .status
    .success());
    let strip = |path: &Path| -> Vec<serde_json::Value> {
        std::fs::read_to_string(path)
            .unwrap()
            .lines()
            .map(|l| {
                let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
                v.as_object_mut().unwrap().remove("wall_ms");
                v
            })
            .collect()
    };
    assert_eq!(
        strip(&seq.join("online.jsonl")),
        strip(&out.join("online.jsonl"))
    );
}

#[test]
fn scripted_run_and_partial_failure_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.json");
    std::fs::write(&manifest, NATURE_MANIFEST).unwrap();
    let out = dir.path().join("out");
    let o = run(&[
        "eval",
        "run",
        "--manifest",
        p(&manifest),
        "--mode",
        "online",
        "--out",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rec: serde_json::Value = serde_json::from_str(
        std::fs::read_to_string(out.join("online.jsonl"))
            .unwrap()
            .trim(),
    )
    .unwrap();
    assert_eq!(rec["output"], "Nature can tell us");
    assert_eq!(rec["latency_s"], 1.625);
    assert!(!out.join("offline.jsonl").exists());

    let broken = NATURE_MANIFEST.replace(
        "]\n}",
        r#", {"id": "bad", "direction": "en-en", "reference": "x", "input": {"script": ["a b", "a b", "c"]}}]}"#,
    );
    std::fs::write(&manifest, broken).unwrap();
    let o = run(&["eval", "run", "--manifest", p(&manifest), "--out", p(&out)]);
    assert_eq!(
        o.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let lines = std::fs::read_to_string(out.join("online.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 2);
    assert!(lines.lines().nth(1).unwrap().contains("\"error\""));
}

#[test]
fn fatal_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.json");
    std::fs::write(&manifest, NATURE_MANIFEST).unwrap();
    let out = dir.path().join("out");
    let unreachable = format!("remote:127.0.0.1:{}", free_port());
    let o = run(&[
        "eval",
        "run",
        "--manifest",
        p(&manifest),
        "--backend",
        &unreachable,
        "--out",
        p(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("handshake"));

    assert_eq!(
        run(&[
            "eval",
            "run",
            "--manifest",
            "/nonexistent.json",
            "--out",
            p(&out)
        ])
        .status
        .code(),
        Some(1)
    );

    // Records that do not pair up.
    let sys = dir.path().join("sys.jsonl");
    let base = dir.path().join("base.jsonl");
    let rec = |id: &str| {
        format!(
            r#"{{"id":"{id}","direction":"d","mode":"online","output":"a","reference":"a","commit_log":[{{"tokens":["a"],"chunk_index":1}}],"total_chunks":1,"chunk_duration_s":0.5,"latency_s":0.5,"wall_ms":0.0}}"#
        )
    };
    std::fs::write(&sys, rec("x") + "\n").unwrap();
    std::fs::write(&base, rec("y") + "\n").unwrap();
    let o = run(&[
        "eval",
        "report",
        "--system",
        p(&sys),
        "--baseline",
        p(&base),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("pairing"));
}

#[test]
fn corpus_mix_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.jsonl");
    let mut text = String::new();
    for i in 0..200 {
        text.push_str(&format!(
            "{{\"id\":\"u{i}\",\"source\":{{\"frames\":\"u{i}.bin\",\"count\":{}}},\"target\":[\"a\",\"b\",\"c\",\"d\",\"e\"]}}\n",
            100 + i
        ));
    }
    std::fs::write(&input, text).unwrap();
    let mix = |name: &str| {
        let out = dir.path().join(name);
        let o = run(&[
            "corpus",
            "mix",
            "--in",
            p(&input),
            "--out",
            p(&out),
            "--seed",
            "3",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let a = mix("a.jsonl");
    let b = mix("b.jsonl");
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    let lines: Vec<&str> = std::str::from_utf8(&bytes).unwrap().lines().collect();
    assert_eq!(lines.len(), 400);
    assert_eq!(lines.iter().filter(|l| l.contains("#partial")).count(), 200);
    let stats: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("a.jsonl.stats.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(stats["stats"]["partial"], 200);

    let o = run(&[
        "corpus",
        "mix",
        "--in",
        p(&input),
        "--out",
        p(&a),
        "--lo",
        "0.5",
        "--hi",
        "0.2",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

struct Server(Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn spawn(args: &[&str], port: u16) -> Server {
    let child = bin().args(args).stderr(Stdio::null()).spawn().unwrap();
    let server = Server(child);
    let deadline = Instant::now() + Duration::from_secs(10);
    while TcpStream::connect(("127.0.0.1", port)).is_err() {
        assert!(Instant::now() < deadline, "server did not come up");
        std::thread::sleep(Duration::from_millis(50));
    }
    server
}

#[test]
fn serve_and_stream_a_wav() {
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("utt.wav");
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: 8000,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(&wav, spec).unwrap();
    // Two seconds: four half-second chunks.
    for i in 0..16_000 {
        w.write_sample(((i % 200) as i16 - 100) * 50).unwrap();
    }
    w.finalize().unwrap();

    let dec_port = free_port();
    let _decoder = spawn(
        &[
            "decoder-serve",
            "--bind",
            &format!("127.0.0.1:{dec_port}"),
            "--backend",
            "nature",
        ],
        dec_port,
    );
    let port = free_port();
    let addr = format!("127.0.0.1:{port}");
    let _server = spawn(
        &[
            "serve",
            "--bind",
            &addr,
            "--backend",
            &format!("remote:127.0.0.1:{dec_port}"),
            "--backend",
            "nature",
            "--max-sessions",
            "4",
        ],
        port,
    );
    let stream = |backend: &str| {
        let o = run(&[
            "stream",
            "--connect",
            &addr,
            "--wav-frames",
            p(&wav),
            "--chunk",
            "0.5",
            "--backend",
            backend,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    };
    let remote = stream("remote");
    assert_eq!(remote, stream("nature"));
    let commits: Vec<(Vec<String>, u64, bool)> = remote
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .filter(|v| v["type"] == "commit")
        .map(|v| {
            (
                serde_json::from_value(v["tokens"].clone()).unwrap(),
                v["chunk_index"].as_u64().unwrap(),
                v["final"].as_bool().unwrap(),
            )
        })
        .collect();
    let s = |w: &[&str]| w.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    assert_eq!(
        commits,
        vec![
            (s(&[]), 1, false),
            (s(&["Nature"]), 2, false),
            (s(&["can"]), 3, false),
            (s(&["tell"]), 4, false),
            (s(&["us"]), 4, true),
        ]
    );
    assert!(remote
        .lines()
        .last()
        .unwrap()
        .contains("\"latency_s\":1.625"));
}
