use pixie_core::protocol::{
    decode, encode, Command, Envelope, Event, EventFrame, EventType, JoinSpec, WorldHost,
};
use pixie_core::world::{bundled, load_world, AvatarKind, AvatarSample, Position, Target};
use proptest::prelude::*;
use serde_json::Value;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6..1e6f64, Just(0.0), Just(0.1), Just(1e-300), Just(-2.5e12)]
}

fn text() -> impl Strategy<Value = String> {
    prop_oneof!["[a-z0-9_]{0,12}", any::<String>(), Just("tab\t\"quote\" \\ \u{1F600}".to_string())]
}

fn kind() -> impl Strategy<Value = AvatarKind> {
    prop_oneof![Just(AvatarKind::User), Just(AvatarKind::Agent)]
}

fn json_value() -> impl Strategy<Value = Value> {
    let leaf = prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::Bool),
        any::<i64>().prop_map(Value::from),
        finite().prop_map(Value::from),
        text().prop_map(Value::String),
    ];
    leaf.prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..4).prop_map(Value::Array),
            prop::collection::btree_map("[a-z]{1,6}", inner, 0..4)
                .prop_map(|m| Value::Object(m.into_iter().collect())),
        ]
    })
}

fn target() -> impl Strategy<Value = Target> {
    prop_oneof![
        "[a-z]{1,8}".prop_map(Target::NavPoint),
        (finite(), finite()).prop_map(|(x, y)| Target::Position(Position::new(x, y))),
    ]
}

fn command() -> impl Strategy<Value = Command> {
    prop_oneof![
        any::<u32>().prop_map(|v| Command::Hello { v }),
        Just(Command::GetEnvironment {}),
        (text(), target()).prop_map(|(avatar_id, target)| Command::SetDestination { avatar_id, target }),
        text().prop_map(|avatar_id| Command::GetPathStatus { avatar_id }),
        (text(), finite(), finite()).prop_map(|(avatar_id, x, y)| Command::SetPosition { avatar_id, x, y }),
        (text(), finite()).prop_map(|(avatar_id, rad)| Command::SetHeading { avatar_id, rad }),
        (text(), text()).prop_map(|(from, text)| Command::SendChat { from, text }),
        (text(), text()).prop_map(|(from, emote)| Command::PlayEmote { from, emote }),
        (text(), text()).prop_map(|(avatar_id, text)| Command::SetStatusText { avatar_id, text }),
        (text(), kind(), prop::option::of(finite()), prop::option::of(finite()))
            .prop_map(|(id, kind, x, y)| Command::Join { avatar: JoinSpec { id, kind, x, y } }),
        text().prop_map(|avatar_id| Command::Leave { avatar_id }),
        prop::collection::vec(prop::sample::select(EventType::ALL.to_vec()), 0..7)
            .prop_map(|topics| Command::Subscribe { topics }),
    ]
}

fn event() -> impl Strategy<Value = Event> {
    let sample = (text(), kind(), finite(), finite(), finite(), prop::option::of(text()))
        .prop_map(|(id, kind, x, y, heading, status)| AvatarSample { id, kind, x, y, heading, status });
    prop_oneof![
        (text(), kind()).prop_map(|(avatar_id, kind)| Event::UserEntered { avatar_id, kind }),
        (text(), kind()).prop_map(|(avatar_id, kind)| Event::UserExited { avatar_id, kind }),
        (text(), text()).prop_map(|(from, text)| Event::ChatReceived { from, text }),
        text().prop_map(|avatar_id| Event::DestinationReached { avatar_id }),
        text().prop_map(|avatar_id| Event::PathBlocked { avatar_id }),
        (text(), text()).prop_map(|(from, emote)| Event::EmotePlayed { from, emote }),
        prop::collection::vec(sample, 0..4).prop_map(|avatars| Event::TickUpdate { avatars }),
    ]
}

fn envelope() -> impl Strategy<Value = Envelope> {
    (any::<u32>(), text(), finite(), "[A-Za-z]{1,16}", json_value(), prop::option::of(any::<u64>()))
        .prop_map(|(v, id, t_s, kind, payload, seq)| Envelope { v, id, t_s, kind, payload, seq })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn envelopes_round_trip(env in envelope()) {
        prop_assert_eq!(decode(&encode(&env)).unwrap(), env);
    }

    #[test]
    fn commands_round_trip(cmd in command(), id in text(), t in finite()) {
        let env = cmd.to_envelope(id, t);
        let back = decode(&encode(&env)).unwrap();
        prop_assert_eq!(&back, &env);
        prop_assert_eq!(Command::from_envelope(&back).unwrap(), cmd);
    }

    #[test]
    fn events_round_trip(event in event(), seq in any::<u64>(), t_s in finite()) {
        let frame = EventFrame { seq, t_s, event };
        let back = decode(&encode(&frame.to_envelope())).unwrap();
        prop_assert_eq!(EventFrame::from_envelope(&back).unwrap(), frame);
    }

    #[test]
    fn truncation_is_a_decode_error(env in envelope(), cut in 0.0..1.0f64) {
        let bytes = encode(&env);
        let n = ((bytes.len() as f64) * cut) as usize;
        let err = decode(&bytes[..n.min(bytes.len() - 1)]).unwrap_err();
        prop_assert!(err.offset <= n);
    }
}

#[test]
fn bad_frames_leave_room_untouched() {
    let world = load_world(bundled::MUSEUM.as_bytes()).unwrap();
    let mut host = WorldHost::from_world(world, 1, 0.1);
    let join = Command::Join { avatar: JoinSpec { id: "u1".into(), kind: AvatarKind::User, x: None, y: None } };
    host.execute(&join).unwrap();
    let before = serde_json::to_string(&host.snapshot()).unwrap();

    assert!(decode(b"{\"v\":1,\"id\":").is_err());
    assert!(decode(b"not json").is_err());
    let err = host.execute(&Command::Hello { v: 2 }).unwrap_err();
    assert_eq!(err.code, "version");
    let unknown = Envelope { v: 1, id: "9".into(), t_s: 0.0, kind: "Teleport".into(), payload: Value::Null, seq: None };
    assert_eq!(Command::from_envelope(&unknown).unwrap_err().code, "unknown_type");

    assert_eq!(serde_json::to_string(&host.snapshot()).unwrap(), before);
    assert!(host.execute(&Command::GetEnvironment {}).is_ok());
}

#[test]
fn shared_schema_lists_every_message() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../schema/protocol.schema.json");
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let keys = |k: &str| -> Vec<String> {
        let mut v: Vec<String> = schema[k].as_object().unwrap().keys().cloned().collect();
        v.sort();
        v
    };
    let mut commands: Vec<String> = Command::TYPES.iter().map(|s| s.to_string()).collect();
    commands.sort();
    let mut events: Vec<String> = EventType::ALL.iter().map(|t| t.name().to_string()).collect();
    events.sort();
    assert_eq!(keys("commands"), commands);
    assert_eq!(keys("events"), events);

    let listed: Vec<&str> =
        schema["properties"]["type"]["enum"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    for name in commands.iter().chain(&events) {
        assert!(listed.contains(&name.as_str()), "{name} missing from type enum");
    }
    let topics: Vec<&str> =
        schema["$defs"]["event_type"]["enum"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(topics, EventType::ALL.iter().map(|t| t.name()).collect::<Vec<_>>());
}
