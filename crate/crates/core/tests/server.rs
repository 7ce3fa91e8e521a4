use std::time::Duration;

use futures::{SinkExt, StreamExt};
use gazecue::engine::{Engine, EngineConfig, Poi};
use gazecue::geometry::Vec3;
use gazecue::protocol::{
    decode, encode, encode_line, read_log_lines, server, Body, FileLog, Hub, HubConfig, Role,
    WireMessage,
};
use gazecue::sim::replay_file;
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::TcpStream;
use tokio::time::timeout;
use tokio_tungstenite::tungstenite::Message;

const WAIT: Duration = Duration::from_secs(5);

async fn read_msg(r: &mut BufReader<tokio::net::tcp::OwnedReadHalf>) -> WireMessage {
    let mut line = String::new();
    timeout(WAIT, r.read_line(&mut line))
        .await
        .unwrap()
        .unwrap();
    assert!(line.ends_with('\n'));
    decode(line.as_bytes()).unwrap()
}

type Ws = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<TcpStream>>;

async fn next_ws(ws: &mut Ws) -> WireMessage {
    let m = timeout(WAIT, ws.next()).await.unwrap().unwrap().unwrap();
    decode(m.into_text().unwrap().as_bytes()).unwrap()
}

#[tokio::test]
async fn tcp_and_websocket_share_one_session() {
    let dir = tempfile::tempdir().unwrap();
    let log_path = dir.path().join("s.ndjson");
    let mut engine = Engine::new(EngineConfig::default()).unwrap();
    engine.add_poi(Poi::new("crate", Vec3::new(1.2, 1.0, 4.0), ""));
    let hub = Hub::new(
        engine,
        HubConfig::new("e2e", 0),
        Box::new(FileLog::create(&log_path).unwrap()),
    );
    let bound = server::bind("127.0.0.1", 0, 0).await.unwrap();
    let tcp_addr = bound.tcp_addr().unwrap();
    let ws_addr = bound.ws_addr().unwrap();
    let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
    let served = tokio::spawn(server::run(bound, hub, Duration::from_millis(5), async {
        let _ = stop_rx.await;
    }));

    // Headset over the WebSocket endpoint.
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{ws_addr}/ws"))
        .await
        .unwrap();
    let hello = |seq, role| encode_line(&WireMessage::new(seq, 0, Body::Hello { role }));
    ws.send(Message::text(hello(0, Role::Headset)))
        .await
        .unwrap();
    assert!(
        matches!(next_ws(&mut ws).await.body, Body::Welcome { session_id, .. } if session_id == "e2e")
    );

    // Observer over plain TCP.
    let (rd, mut wr) = TcpStream::connect(tcp_addr).await.unwrap().into_split();
    let mut rd = BufReader::new(rd);
    wr.write_all(&encode(&WireMessage::new(
        0,
        0,
        Body::Hello {
            role: Role::Observer,
        },
    )))
    .await
    .unwrap();
    assert!(matches!(read_msg(&mut rd).await.body, Body::Welcome { .. }));

    for i in 1..=3u64 {
        let g = WireMessage::new(
            i,
            i as i64 * 20_000,
            Body::Gaze {
                origin: Vec3::new(0.0, 1.6, 0.0).into(),
                dir: Vec3::Z.into(),
            },
        );
        ws.send(Message::text(encode_line(&g))).await.unwrap();
    }
    tokio::time::sleep(Duration::from_millis(50)).await;
    let start = WireMessage::new(
        1,
        100_000,
        Body::StartAttraction {
            poi_id: "crate".into(),
            mode: None,
        },
    );
    wr.write_all(&encode(&start)).await.unwrap();

    let seen_by_observer = read_msg(&mut rd).await;
    let seen_by_headset = next_ws(&mut ws).await;
    assert!(matches!(seen_by_observer.body, Body::MarkerPlace { .. }));
    assert_eq!(seen_by_observer, seen_by_headset);

    // A role violation closes only the offender.
    let (rd2, mut wr2) = TcpStream::connect(tcp_addr).await.unwrap().into_split();
    let mut rd2 = BufReader::new(rd2);
    wr2.write_all(&encode(&WireMessage::new(
        0,
        0,
        Body::Hello { role: Role::Robot },
    )))
    .await
    .unwrap();
    read_msg(&mut rd2).await;
    wr2.write_all(&encode(&start)).await.unwrap();
    assert!(
        matches!(read_msg(&mut rd2).await.body, Body::Error { code, .. } if code == "role-violation")
    );
    let mut rest = String::new();
    let n = timeout(WAIT, rd2.read_line(&mut rest))
        .await
        .unwrap()
        .unwrap();
    assert_eq!(n, 0, "connection should be closed");

    stop_tx.send(()).unwrap();
    timeout(WAIT, served).await.unwrap().unwrap().unwrap();

    let lines = read_log_lines(&log_path).unwrap();
    assert!(lines.len() > 5);
    let report = replay_file(&log_path).unwrap();
    assert!(report.emissions >= 1);
}
