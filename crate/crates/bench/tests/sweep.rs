use ballotledger_bench::{run_sweep, BenchConfig, BenchError, BenchReport, Grid, Operation};
use ballotledger_core::ServiceConfig;
use ballotledger_service::start;

fn toy() -> ServiceConfig {
    ServiceConfig {
        listen_address: "127.0.0.1:0".into(),
        group: "toy".into(),
        ..ServiceConfig::default()
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn small_write_sweep_writes_csv() {
    let running = start(&toy()).await.unwrap();
    let config = BenchConfig {
        target: format!("http://{}", running.addr),
        operation: Operation::Write,
        send_rates: Grid::List(vec![10, 20]),
        users: Grid::List(vec![2, 5]),
        duration_secs: 1.0,
    };
    let mut seen = 0;
    let report = run_sweep(&config, |_| seen += 1).await.unwrap();
    assert_eq!(seen, 4);
    for cell in &report.cells {
        assert_eq!(cell.errors, 0, "{cell:?}");
        assert!(cell.throughput <= cell.send_rate as f64 + 1e-9);
        assert!(cell.throughput > 0.5 * cell.send_rate as f64, "{cell:?}");
        assert!(cell.avg_latency_secs > 0.0);
    }

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    report.write_csv(&path).unwrap();
    assert_eq!(BenchReport::read_csv(&path).unwrap(), report);
    running.shutdown().await.unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn read_sweep_has_no_errors() {
    let running = start(&toy()).await.unwrap();
    let config = BenchConfig {
        target: format!("http://{}", running.addr),
        operation: Operation::Read,
        send_rates: Grid::List(vec![20]),
        users: Grid::List(vec![4]),
        duration_secs: 1.0,
    };
    let report = run_sweep(&config, |_| {}).await.unwrap();
    assert_eq!(report.cells.len(), 1);
    assert_eq!(report.cells[0].errors, 0);
    running.shutdown().await.unwrap();
}

#[tokio::test]
async fn unreachable_target_is_reported() {
    let config = BenchConfig {
        target: "http://127.0.0.1:9".into(),
        operation: Operation::Read,
        send_rates: Grid::List(vec![1]),
        users: Grid::List(vec![1]),
        duration_secs: 1.0,
    };
    let err = run_sweep(&config, |_| {}).await.unwrap_err();
    assert!(matches!(err, BenchError::ServiceUnreachable(_)), "{err}");
}
