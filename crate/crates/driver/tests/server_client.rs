use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use pixie_core::agent::{Decision, RuleBackend, ScriptBackend, FILLER_TEXT};
use pixie_core::protocol::{
    decode, encode_string, Command, EnvironmentSnapshot, Event, EventType, JoinSpec, WorldHost,
};
use pixie_core::world::{bundled, load_world, AvatarKind, PathStatus, Position, Target, WorldSpec};
use pixie_driver::*;
use tokio_tungstenite::tungstenite::Message;

fn museum_host() -> WorldHost {
    WorldHost::from_world(load_world(bundled::MUSEUM.as_bytes()).unwrap(), 1, 0.1)
}

async fn start(host: WorldHost, tick: TickMode) -> ServerHandle {
    serve(host, "127.0.0.1:0", ServeOptions { tick, ..ServeOptions::default() }).await.unwrap()
}

fn join(id: &str) -> Command {
    Command::Join { avatar: JoinSpec { id: id.into(), kind: AvatarKind::User, x: None, y: None } }
}

async fn next_chat(client: &DriverClient) -> (u64, String, String) {
    loop {
        let f = tokio::time::timeout(Duration::from_secs(5), client.next_event()).await.unwrap().unwrap();
        if let Event::ChatReceived { from, text } = f.event {
            return (f.seq, from, text);
        }
    }
}

#[tokio::test]
async fn snapshot_lists_world_points() {
    let server = start(museum_host(), TickMode::Realtime { time_scale: 1.0 }).await;
    let client = DriverClient::connect(&server.addr().to_string()).await.unwrap();
    let env: EnvironmentSnapshot = client.request_as(Command::GetEnvironment {}).await.unwrap();
    let ids: Vec<&str> = env.nav_points.iter().map(|p| p.id.as_str()).collect();
    assert_eq!(ids, ["entrance", "minerals", "dinosaur", "globe", "pottery", "butterflies", "deck"]);
    server.shutdown().await;
}

#[tokio::test]
async fn handshake_errors() {
    let server = start(museum_host(), TickMode::Manual).await;
    let options = ClientOptions { version: 2, ..ClientOptions::default() };
    let err = DriverClient::connect_with(&server.addr().to_string(), options).await.err().unwrap();
    assert!(matches!(err, DriverError::Version(_)), "{err}");
    assert!(err.to_string().contains("incompatible protocol"));

    let addr = server.addr().to_string();
    server.shutdown().await;
    let err = DriverClient::connect(&addr).await.err().unwrap();
    assert!(matches!(err, DriverError::Connect { .. }), "{err}");
}

#[tokio::test]
async fn destinations_report_feasibility() {
    let server = start(museum_host(), TickMode::Realtime { time_scale: 5.0 }).await;
    let client = DriverClient::connect(&server.addr().to_string()).await.unwrap();
    client.request(join("u")).await.unwrap();
    let ok: PathStatus = client
        .request_as(Command::SetDestination { avatar_id: "u".into(), target: Target::NavPoint("globe".into()) })
        .await
        .unwrap();
    assert!(ok.feasible && ok.remaining_m.unwrap() > 0.0);
    let err = client
        .request(Command::SetDestination { avatar_id: "u".into(), target: Target::NavPoint("moon".into()) })
        .await
        .unwrap_err();
    assert!(matches!(err, DriverError::Remote(ref e) if e.code == "unknown_nav_point"), "{err}");
    let off_map = Target::Position(Position::new(-50.0, -50.0));
    let no: PathStatus =
        client.request_as(Command::SetDestination { avatar_id: "u".into(), target: off_map }).await.unwrap();
    assert_eq!(no, PathStatus { feasible: false, remaining_m: None });
    server.shutdown().await;
}

#[tokio::test]
async fn bad_frames_keep_connection_and_room() {
    let server = start(museum_host(), TickMode::Realtime { time_scale: 5.0 }).await;
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{}/ws", server.addr())).await.unwrap();
    let before = server.snapshot();

    let mut exchange = async |frame: String| -> pixie_core::protocol::Envelope {
        ws.send(Message::Text(frame.into())).await.unwrap();
        loop {
            let Message::Text(t) = ws.next().await.unwrap().unwrap() else { continue };
            let env = decode(t.as_bytes()).unwrap();
            if env.is_response() {
                return env;
            }
        }
    };
    let e = exchange("{\"v\":1,\"id\":".into()).await;
    assert_eq!(e.into_result().unwrap_err().code, "bad_frame");
    let e = exchange(r#"{"v":2,"id":"a","t_s":0,"type":"GetEnvironment","payload":{}}"#.into()).await;
    assert_eq!(e.id, "a");
    assert_eq!(e.into_result().unwrap_err().code, "version");
    let e = exchange(r#"{"v":1,"id":"b","t_s":0,"type":"Teleport","payload":{}}"#.into()).await;
    assert_eq!(e.into_result().unwrap_err().code, "unknown_type");
    let e = exchange(encode_string(&Command::GetEnvironment {}.to_envelope("c", 0.0))).await;
    assert_eq!(e.id, "c");
    let after: EnvironmentSnapshot = serde_json::from_value(e.into_result().unwrap()).unwrap();
    assert_eq!(after.users, before.users);
    assert_eq!(after.nav_points, before.nav_points);
    server.shutdown().await;
}

#[tokio::test]
async fn subscribers_see_the_same_order() {
    let server = start(museum_host(), TickMode::Realtime { time_scale: 5.0 }).await;
    let addr = server.addr().to_string();
    let a = DriverClient::connect(&addr).await.unwrap();
    let b = DriverClient::connect(&addr).await.unwrap();
    a.request(join("a")).await.unwrap();
    b.request(join("b")).await.unwrap();
    for c in [&a, &b] {
        c.subscribe(vec![EventType::ChatReceived]).await.unwrap();
    }
    let sends = (0..10).map(|i| {
        let (c, who) = if i % 2 == 0 { (a.clone(), "a") } else { (b.clone(), "b") };
        async move { c.request(Command::SendChat { from: who.into(), text: format!("m{i}") }).await.unwrap() }
    });
    futures_util::future::join_all(sends).await;
    let mut seen = [vec![], vec![]];
    for (k, c) in [&a, &b].into_iter().enumerate() {
        for _ in 0..10 {
            seen[k].push(next_chat(c).await);
        }
    }
    assert_eq!(seen[0], seen[1]);
    assert!(seen[0].windows(2).all(|w| w[0].0 < w[1].0));
    server.shutdown().await;
}

#[tokio::test]
async fn hundred_commands_in_one_tick_all_answered_in_order() {
    let options = ServeOptions { tick: TickMode::Manual, max_commands_per_tick: 16, ui_dir: None };
    let server = serve(museum_host(), "127.0.0.1:0", options).await.unwrap();
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{}/ws", server.addr())).await.unwrap();
    for i in 0..100 {
        let cmd = Command::SendChat { from: "nobody".into(), text: i.to_string() };
        ws.send(Message::Text(encode_string(&cmd.to_envelope(i.to_string(), 0.0)).into())).await.unwrap();
    }
    server.wait_queued(100).await;
    let mut ticks = 0;
    while server.queued() > 0 {
        server.tick();
        ticks += 1;
    }
    assert_eq!(ticks, 7);
    let mut answers = vec![];
    while answers.len() < 100 {
        let Message::Text(t) = ws.next().await.unwrap().unwrap() else { continue };
        let env = decode(t.as_bytes()).unwrap();
        if env.is_response() {
            answers.push((env.id.parse::<usize>().unwrap(), env.t_s));
        }
    }
    assert!(answers.iter().enumerate().all(|(i, (id, _))| *id == i));
    assert!(answers.windows(2).all(|w| w[0].1 <= w[1].1));
    server.shutdown().await;
}

#[tokio::test]
async fn path_status_after_two_seconds() {
    let world = WorldSpec::from_rows("corridor", 1.0, &[".........."], Position::new(0.0, 0.5), vec![], vec![])
        .unwrap();
    let server = start(WorldHost::from_world(world, 1, 0.1), TickMode::Manual).await;
    let client = DriverClient::connect(&server.addr().to_string()).await.unwrap();

    let send = async |cmd: Command| {
        let c = client.clone();
        let reply = tokio::spawn(async move { c.request(cmd).await });
        server.wait_queued(1).await;
        server.tick();
        reply.await.unwrap().unwrap()
    };
    send(Command::Join { avatar: JoinSpec { id: "u".into(), kind: AvatarKind::User, x: Some(0.0), y: Some(0.5) } })
        .await;
    let target = Target::Position(Position::new(10.0, 0.5));
    let status: PathStatus = serde_json::from_value(send(Command::SetDestination { avatar_id: "u".into(), target }).await).unwrap();
    assert_eq!(status.remaining_m, Some(10.0));
    // the tick that applied SetDestination already moved the avatar once
    for _ in 0..19 {
        server.tick();
    }
    let status: PathStatus = serde_json::from_value(send(Command::GetPathStatus { avatar_id: "u".into() }).await).unwrap();
    let remaining = status.remaining_m.unwrap();
    assert!((remaining - 6.0).abs() <= 0.2 + 1e-9, "{remaining}");
    server.shutdown().await;
}

#[tokio::test]
async fn http_shim_and_static_files() {
    let ui = tempfile::tempdir().unwrap();
    std::fs::write(ui.path().join("index.html"), "<h1>pixie</h1>").unwrap();
    let options = ServeOptions { ui_dir: Some(ui.path().to_path_buf()), ..ServeOptions::default() };
    let server = serve(museum_host(), "127.0.0.1:0", options).await.unwrap();
    let base = format!("http://{}", server.addr());
    let client = DriverClient::connect(&server.addr().to_string()).await.unwrap();
    client.request(join("u")).await.unwrap();
    client.subscribe(vec![EventType::ChatReceived]).await.unwrap();

    let http = reqwest::Client::new();
    let env: EnvironmentSnapshot = http.get(format!("{base}/env")).send().await.unwrap().json().await.unwrap();
    assert_eq!(env.nav_points.len(), 7);
    assert!(env.users.iter().any(|u| u.id == "u"));

    let res = http
        .post(format!("{base}/chat"))
        .json(&serde_json::json!({"from": "u", "text": "hello over http"}))
        .send()
        .await
        .unwrap();
    assert!(res.status().is_success());
    let (_, from, text) = next_chat(&client).await;
    assert_eq!((from.as_str(), text.as_str()), ("u", "hello over http"));

    let res = http.post(format!("{base}/chat")).json(&serde_json::json!({"from": "ghost", "text": "x"})).send().await.unwrap();
    assert_eq!(res.status(), 400);

    let page = http.get(format!("{base}/index.html")).send().await.unwrap().text().await.unwrap();
    assert_eq!(page, "<h1>pixie</h1>");
    server.shutdown().await;
}

#[tokio::test]
async fn reconnects_once_and_resubscribes() {
    let server = start(museum_host(), TickMode::Realtime { time_scale: 5.0 }).await;
    let addr = server.addr().to_string();
    let client = DriverClient::connect(&addr).await.unwrap();
    client.subscribe(vec![EventType::ChatReceived]).await.unwrap();
    server.shutdown().await;
    let server = serve(museum_host(), &addr, ServeOptions::default()).await.unwrap();

    let deadline = tokio::time::Instant::now() + Duration::from_secs(5);
    loop {
        if client.request(join("u")).await.is_ok() {
            break;
        }
        assert!(tokio::time::Instant::now() < deadline, "never reconnected");
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
    // ChatReceived arrives without subscribing again; UserEntered does not
    client.request(Command::SendChat { from: "u".into(), text: "back".into() }).await.unwrap();
    let f = tokio::time::timeout(Duration::from_secs(5), client.next_event()).await.unwrap().unwrap();
    assert!(matches!(f.event, Event::ChatReceived { ref text, .. } if text == "back"), "{f:?}");

    // the second loss is final
    server.shutdown().await;
    let end = tokio::time::timeout(Duration::from_secs(5), async {
        while client.next_event().await.is_some() {}
    })
    .await;
    assert!(end.is_ok());
    assert!(matches!(client.request(Command::GetEnvironment {}).await, Err(DriverError::Lost)));
}

async fn user_session(time_scale: f64) -> (ServerHandle, DriverClient) {
    let server = start(museum_host(), TickMode::Realtime { time_scale }).await;
    let user = DriverClient::connect(&server.addr().to_string()).await.unwrap();
    user.subscribe(vec![EventType::ChatReceived, EventType::DestinationReached]).await.unwrap();
    (server, user)
}

#[tokio::test(flavor = "multi_thread")]
async fn agent_guides_over_the_network() {
    let (server, user) = user_session(20.0).await;
    let agent_client = DriverClient::connect(&server.addr().to_string()).await.unwrap();
    let agent = run_agent(agent_client, Box::new(RuleBackend::new(0.2)), RunAgentConfig::default());
    tokio::time::sleep(Duration::from_millis(100)).await;
    user.request(join("visitor")).await.unwrap();
    user.request(Command::SendChat { from: "visitor".into(), text: "guide me to the globe".into() }).await.unwrap();

    let mut replied = false;
    let reached = tokio::time::timeout(Duration::from_secs(20), async {
        while let Some(f) = user.next_event().await {
            match f.event {
                Event::ChatReceived { from, text } if from == "pixie" && text != FILLER_TEXT => replied = true,
                Event::DestinationReached { avatar_id } if avatar_id == "pixie" => return true,
                _ => {}
            }
        }
        false
    })
    .await
    .unwrap();
    assert!(replied && reached);
    // give the agent a moment to handle its own arrival
    tokio::time::sleep(Duration::from_millis(200)).await;
    let env = server.snapshot();
    let pixie = env.users.iter().find(|u| u.id == "pixie").unwrap();
    let globe = env.nav_point("globe").unwrap();
    assert!(Position::new(pixie.x, pixie.y).distance(&Position::new(globe.x, globe.y)) < 1.0);

    let out = agent.stop().await;
    assert!(out.error.is_none(), "{:?}", out.error);
    assert!(out.intervals.iter().any(|i| i.state == "PerformingAction" && i.reached == Some(true)));
    server.shutdown().await;
}

#[tokio::test(flavor = "multi_thread")]
async fn slow_backend_gets_one_filler_then_suspends() {
    let (server, user) = user_session(10.0).await;
    let log = tempfile::NamedTempFile::new().unwrap();
    let config = RunAgentConfig { log_path: Some(log.path().to_path_buf()), ..RunAgentConfig::default() };
    let slow = ScriptBackend::new([Decision { delay_s: 2.0, ..Decision::say("Here is a long answer about the exhibits in this hall.") }]);
    let agent = run_agent(DriverClient::connect(&server.addr().to_string()).await.unwrap(), Box::new(slow), config);
    tokio::time::sleep(Duration::from_millis(100)).await;
    user.request(join("visitor")).await.unwrap();
    user.request(Command::SendChat { from: "visitor".into(), text: "tell me about this hall".into() }).await.unwrap();

    let mut fillers = 0;
    tokio::time::timeout(Duration::from_secs(10), async {
        loop {
            let (_, from, text) = next_chat(&user).await;
            if from != "pixie" {
                continue;
            }
            if text == FILLER_TEXT {
                fillers += 1;
            } else {
                break;
            }
        }
    })
    .await
    .unwrap();
    assert_eq!(fillers, 1);

    // leave while the reply is still being played back
    user.request(Command::Leave { avatar_id: "visitor".into() }).await.unwrap();
    tokio::time::sleep(Duration::from_millis(300)).await;
    let out = agent.stop().await;
    assert!(out.error.is_none(), "{:?}", out.error);
    assert_eq!(out.intervals.last().unwrap().state, "Suspend");
    let written = std::fs::read_to_string(log.path()).unwrap();
    assert_eq!(written.lines().count(), out.records.len());
    server.shutdown().await;
}
