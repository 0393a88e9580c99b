mod common;

use common::{run, write, EXAMPLE_ERAN};
use exactnet_core::analysis::decision_regions;
use exactnet_core::network::{network_to_json, parse_json_network};
use exactnet_core::random::{random_network, Activation};
use rand::SeedableRng;
use serde_json::Value;

fn stdout_json(out: &std::process::Output) -> Value {
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    assert!(text.ends_with('\n'), "missing trailing newline");
    serde_json::from_str(&text).unwrap()
}

fn stderr(out: &std::process::Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const RELU_JSON: &str = r#"{"input_dim":2,"layers":[{"type":"relu"}]}"#;
const SQUARE: &str = "[[-0.5,-0.5],[0.5,-0.5],[0.5,0.5],[-0.5,0.5]]";

#[test]
fn partitions_example_line() {
    let dir = tempfile::tempdir().unwrap();
    let net = write(dir.path(), "ex.eran", EXAMPLE_ERAN);
    let out = run(&["partitions", "--network", &net, "--line", "-1;2"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stderr(&out).contains("3 segments"));
    let json = stdout_json(&out);
    assert_eq!(json["preimages"], serde_json::json!([[-1.0], [0.0], [1.0], [2.0]]));
}

#[test]
fn partitions_relu_square_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let net = write(dir.path(), "relu.json", RELU_JSON);
    let poly = write(dir.path(), "square.json", SQUARE);
    let target = dir.path().join("out.json");
    let out = run(&[
        "partitions",
        "--network",
        &net,
        "--polytope",
        &poly,
        "--out",
        target.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stderr(&out).contains("4 regions"));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(target).unwrap();
    assert!(text.ends_with('\n'));
    let json: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(json["regions"].as_array().unwrap().len(), 4);
}

#[test]
fn polytope_object_form() {
    let dir = tempfile::tempdir().unwrap();
    let net = write(dir.path(), "relu.json", RELU_JSON);
    let poly = write(dir.path(), "square.json", &format!(r#"{{"vertices":{SQUARE}}}"#));
    let out = run(&["partitions", "--network", &net, "--polytope", &poly]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let net = write(dir.path(), "relu.json", RELU_JSON);
    let square = write(dir.path(), "square.json", SQUARE);
    let cw = write(dir.path(), "cw.json", "[[-0.5,-0.5],[-0.5,0.5],[0.5,0.5],[0.5,-0.5]]");
    let bad = write(dir.path(), "bad.eran", "Affine\n[[1, 2]\n[0]\n");
    let unknown = write(dir.path(), "unknown.eran", "Sigmoid\n");

    let code = |args: &[&str]| run(args).status.code();
    assert_eq!(code(&["partitions", "--network", &bad, "--line", "0;1"]), Some(1));
    assert_eq!(code(&["partitions", "--network", &unknown, "--line", "0;1"]), Some(1));
    assert_eq!(
        code(&["partitions", "--network", "/nonexistent", "--line", "0;1"]),
        Some(1)
    );
    assert_eq!(code(&["partitions", "--network", &net, "--polytope", &cw]), Some(2));
    assert_eq!(code(&["partitions", "--network", &net, "--line", "0,0;0,0"]), Some(2));
    assert_eq!(code(&["partitions", "--network", &net, "--line", "0;1"]), Some(2));
    assert_eq!(
        code(&[
            "--region-budget",
            "3",
            "partitions",
            "--network",
            &net,
            "--polytope",
            &square
        ]),
        Some(3)
    );
    assert_eq!(code(&["partitions", "--network", &net]), Some(1));
    assert_eq!(code(&["--help"]), Some(0));
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let net = random_network(&mut rng, 2, &[(12, Activation::Relu), (12, Activation::HardTanh)], 3);
    let net = write(dir.path(), "net.json", &network_to_json(&net));
    let poly = write(dir.path(), "poly.json", "[[-2,-2],[2,-2],[2,2],[-2,2]]");
    let outputs: Vec<Vec<u8>> = ["1", "2", "4"]
        .iter()
        .map(|t| {
            let out = common::bin()
                .args(["partitions", "--network", &net, "--polytope", &poly])
                .env("SYRENN_THREADS", t)
                .output()
                .unwrap();
            assert!(out.status.success());
            out.stdout
        })
        .collect();
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn ig_example() {
    let dir = tempfile::tempdir().unwrap();
    let net = write(dir.path(), "ex.eran", EXAMPLE_ERAN);
    let out = run(&[
        "ig",
        "--network",
        &net,
        "--baseline",
        "-1",
        "--input",
        "2",
        "--label",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stderr(&out).contains("completeness"));
    let json = stdout_json(&out);
    assert_eq!(json["values"], serde_json::json!([0.0]));
    assert_eq!(json["target"], 0);
    assert_eq!(json["f_input"], -1.0);
}

#[test]
fn ig_compare_sampling() {
    let dir = tempfile::tempdir().unwrap();
    let net = write(dir.path(), "ex.eran", EXAMPLE_ERAN);
    let out = run(&[
        "ig",
        "--network",
        &net,
        "--baseline",
        "-1",
        "--input",
        "2",
        "--compare-sampling",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let table = stdout_json(&out)["sampling"].as_array().unwrap().clone();
    assert_eq!(table.len(), 1);
    assert_eq!(table[0]["m"], 10);
    assert!(table[0]["trapezoid_error"].as_f64().unwrap() <= table[0]["left_error"].as_f64().unwrap());
}

#[test]
fn ig_label_out_of_range() {
    let dir = tempfile::tempdir().unwrap();
    let net = write(dir.path(), "ex.eran", EXAMPLE_ERAN);
    let out = run(&[
        "ig",
        "--network",
        &net,
        "--baseline",
        "-1",
        "--input",
        "2",
        "--label",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

fn svg_counts(path: &std::path::Path) -> (usize, usize, Vec<String>) {
    let text = std::fs::read_to_string(path).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap();
    let paths: Vec<_> = doc.descendants().filter(|n| n.has_tag_name("path")).collect();
    let rects = doc.descendants().filter(|n| n.has_tag_name("rect")).count();
    let fills = paths.iter().map(|n| n.attribute("fill").unwrap().to_string()).collect();
    (paths.len(), rects, fills)
}

#[test]
fn classify_diagonal_split() {
    let dir = tempfile::tempdir().unwrap();
    let net = write(
        dir.path(),
        "id.json",
        r#"{"input_dim":2,"layers":[{"type":"affine","weights":[[1,0],[0,1]],"bias":[0,0]}]}"#,
    );
    let poly = write(dir.path(), "unit.json", "[[0,0],[1,0],[1,1],[0,1]]");
    let svg = dir.path().join("out.svg");
    let out = run(&[
        "classify",
        "--network",
        &net,
        "--polytope",
        &poly,
        "--svg",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let (paths, legend, mut fills) = svg_counts(&svg);
    assert_eq!((paths, legend), (2, 2));
    fills.sort();
    assert_eq!(fills, vec!["#1f77b4", "#ff7f0e"]);

    let out = run(&[
        "classify",
        "--network",
        &net,
        "--polytope",
        &poly,
        "--svg",
        svg.to_str().unwrap(),
        "--colors",
        "red,blue",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let (_, _, mut fills) = svg_counts(&svg);
    fills.sort();
    assert_eq!(fills, vec!["blue", "red"]);
}

#[test]
fn classify_constant_output() {
    let dir = tempfile::tempdir().unwrap();
    let net = write(
        dir.path(),
        "const.json",
        r#"{"input_dim":2,"layers":[{"type":"affine","weights":[[0,0],[0,0]],"bias":[1,0]}]}"#,
    );
    let poly = write(dir.path(), "unit.json", "[[0,0],[1,0],[1,1],[0,1]]");
    let svg = dir.path().join("out.svg");
    let out = run(&[
        "classify",
        "--network",
        &net,
        "--polytope",
        &poly,
        "--svg",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(svg_counts(&svg).0, 1);
}

#[test]
fn classify_five_outputs_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
    let net = random_network(&mut rng, 2, &[(16, Activation::Relu), (16, Activation::Relu)], 5);
    let net_path = write(dir.path(), "acas.json", &network_to_json(&net));
    let poly = write(dir.path(), "poly.json", "[[-3,-3],[3,-3],[3,3],[-3,3]]");
    let svg = dir.path().join("out.svg");
    let json = dir.path().join("regions.json");
    let out = run(&[
        "classify",
        "--network",
        &net_path,
        "--polytope",
        &poly,
        "--svg",
        svg.to_str().unwrap(),
        "--out",
        json.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let (paths, legend, _) = svg_counts(&svg);
    let net = parse_json_network(&network_to_json(&net)).unwrap();
    let x = exactnet_core::geometry::validate_region(
        [[-3.0, -3.0], [3.0, -3.0], [3.0, 3.0], [-3.0, 3.0]]
            .iter()
            .map(|c| c.to_vec().into())
            .collect(),
        &Default::default(),
    )
    .unwrap();
    assert_eq!(paths, decision_regions(&net, &x).unwrap().len());
    assert_eq!(legend, 5);
    let regions: Value = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(regions["regions"].as_array().unwrap().len(), paths);
}

#[test]
fn serve_port_in_use() {
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port().to_string();
    let out = run(&["serve", "--port", &port]);
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
    let out = common::bin().arg("serve").env("SYRENN_PORT", &port).output().unwrap();
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn serve_session_and_interrupt() {
    let server = common::Server::start();
    let mut client = server.connect();
    let token = client.session(&network_to_json(
        &exactnet_core::network::parse_eran(EXAMPLE_ERAN).unwrap(),
    ));
    let reply: Value =
        serde_json::from_str(&client.request(&format!(r#"{{"op":"line","session":"{token}","a":[-1],"b":[2]}}"#)))
            .unwrap();
    assert_eq!(reply["result"]["breakpoints"].as_array().unwrap().len(), 4);
    let reply: Value = serde_json::from_str(&client.request("this is not json")).unwrap();
    assert_eq!(reply["error"]["kind"], "parse");
    // The connection survives a malformed request.
    let reply: Value =
        serde_json::from_str(&client.request(&format!(r#"{{"op":"close","session":"{token}"}}"#))).unwrap();
    assert_eq!(reply["ok"], true);
    assert_eq!(server.interrupt(), Some(0));
}
