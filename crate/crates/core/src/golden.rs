//! Built-in worked scenarios with their expected narratives.
//!
//! Times in the original traces were UTC seconds; here they are shifted so
//! each scenario starts at tick 0, one tick per second.

use crate::engine::{Action, SimEvent};

pub struct GoldenScenario {
    pub name: &'static str,
    pub description: &'static str,
    pub events: Vec<SimEvent>,
    pub narrative: &'static str,
}

const NET: &str = "facebook";

fn registrations(at: u64, services: &[&str]) -> Vec<SimEvent> {
    services.iter().map(|s| SimEvent::register(at, NET, s)).collect()
}

/// Share a video, like a track, then collect profile data, all on one account.
pub fn sharing_walkthrough() -> GoldenScenario {
    let mut events = registrations(0, &["sws_youtube", "sws_soundcloud", "sws_linkedin"]);
    events.extend([
        SimEvent::new(0, NET, "alice", Action::Share, "sws_youtube")
            .with_duration(5)
            .with_detail("video", "share_video"),
        SimEvent::new(1, NET, "alice", Action::PostActivity, "sws_soundcloud")
            .with_duration(5)
            .with_detail("like_music", "post_activity"),
        SimEvent::new(2, NET, "alice", Action::Collect, "sws_linkedin")
            .with_duration(5)
            .with_detail("contact_list", "build_network"),
    ]);
    GoldenScenario {
        name: "sharing-walkthrough",
        description: "Share (goal check + post), PostActivity and Collect on facebook/alice",
        events,
        narrative: "\
C_Resp6 : Checks Sharing Goal is Active
C_Resp2 : Shares Information is Waiting
C_Resp7 : Post Activity is Waiting
C_Resp1 : Collects Information is Waiting
C_Resp6 : Checks Sharing Goal is Deactivate
C_Resp2 : is Signal
C_Resp2 : Shares Information is Active
C_Resp2 : Shares Information is Deactivate
C_Resp7 : is Signal
C_Resp7 : Post Activity is Active
C_Resp7 : Post Activity is Deactivate
C_Resp1 : is Signal
C_Resp1 : Collects Information is Active
C_Resp1 : Collects Information is Deactivate
",
    }
}

/// Collect 16:15:05, post 16:15:07, like 16:15:09.
pub fn trace_row1() -> GoldenScenario {
    let mut events = registrations(0, &["sws_linkedin", "sws_youtube", "sws_soundcloud"]);
    events.extend([
        SimEvent::new(0, NET, "user", Action::Collect, "sws_linkedin").with_duration(4),
        SimEvent::new(2, NET, "user", Action::Post, "sws_youtube").with_duration(4),
        SimEvent::new(4, NET, "user", Action::PostActivity, "sws_soundcloud").with_duration(4),
    ]);
    GoldenScenario {
        name: "trace-row1",
        description: "Collect, Post and PostActivity two seconds apart; two commitments wait",
        events,
        narrative: "\
C_Resp1 : Collects Information is Active
C_Resp2 : Shares Information is Waiting
C_Resp7 : Post Activity is Waiting
C_Resp1 : Collects Information is Deactivate
C_Resp2 : is Signal
C_Resp2 : Shares Information is Active
C_Resp2 : Shares Information is Deactivate
C_Resp7 : is Signal
C_Resp7 : Post Activity is Active
C_Resp7 : Post Activity is Deactivate
",
    }
}

/// Like 04:35:20, post 04:35:22.
pub fn trace_row2() -> GoldenScenario {
    let mut events = registrations(0, &["sws_soundcloud", "sws_youtube"]);
    events.extend([
        SimEvent::new(0, NET, "user", Action::PostActivity, "sws_soundcloud").with_duration(4),
        SimEvent::new(2, NET, "user", Action::Post, "sws_youtube").with_duration(4),
    ]);
    GoldenScenario {
        name: "trace-row2",
        description: "PostActivity then Post two seconds later; the post waits",
        events,
        narrative: "\
C_Resp7 : Post Activity is Active
C_Resp2 : Shares Information is Waiting
C_Resp7 : Post Activity is Deactivate
C_Resp2 : is Signal
C_Resp2 : Shares Information is Active
C_Resp2 : Shares Information is Deactivate
",
    }
}

/// Collect 02:21:10, post 02:21:14, play 02:21:18.
pub fn trace_row3() -> GoldenScenario {
    let mut events = registrations(0, &["sws_linkedin", "sws_youtube", "sws_soundcloud"]);
    events.extend([
        SimEvent::new(0, NET, "user", Action::Collect, "sws_linkedin").with_duration(3),
        SimEvent::new(4, NET, "user", Action::Post, "sws_youtube").with_duration(3),
        SimEvent::new(8, NET, "user", Action::PostActivity, "sws_soundcloud").with_duration(3),
    ]);
    GoldenScenario {
        name: "trace-row3",
        description: "Requests four seconds apart; nothing overlaps and nothing waits",
        events,
        narrative: "\
C_Resp1 : Collects Information is Active
C_Resp1 : Collects Information is Deactivate
C_Resp2 : Shares Information is Active
C_Resp2 : Shares Information is Deactivate
C_Resp7 : Post Activity is Active
C_Resp7 : Post Activity is Deactivate
",
    }
}

/// Collect and NotTamper overlapping on one account: friends run together.
pub fn friendly_readers() -> GoldenScenario {
    let mut events = registrations(0, &["sws_linkedin", "sws_twitter"]);
    events.extend([
        SimEvent::new(0, NET, "user", Action::Collect, "sws_linkedin").with_duration(4),
        SimEvent::new(1, NET, "user", Action::NotTamper, "sws_twitter").with_duration(4),
    ]);
    GoldenScenario {
        name: "friendly-readers",
        description: "Collect and NotTamper overlap; both readers run concurrently",
        events,
        narrative: "\
C_Resp1 : Collects Information is Active
C_Resp3 : Protects Information is Active
C_Resp1 : Collects Information is Deactivate
C_Resp3 : Protects Information is Deactivate
",
    }
}

pub fn all() -> Vec<GoldenScenario> {
    vec![
        sharing_walkthrough(),
        trace_row1(),
        trace_row2(),
        trace_row3(),
        friendly_readers(),
    ]
}
