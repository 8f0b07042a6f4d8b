//! Prompt text for the LLM agents.
//!
//! Hypotheses are requested in the rule language of [`crate::rulelang`];
//! everything else follows the task's standard wording, including the
//! teacher's misleading color instruction.

use crate::env::{Action, KeyDef, Layout, Outcome};
use crate::llm_backend::ChatMessage;
use crate::rulelang::BoxView;
use crate::smc::Evidence;

use super::observe_text;

pub const SYSTEM_PROMPT: &str = "You are an intelligent agent playing a game.
Your task is to open 5 boxes using 13 keys in fewest attempts.
You do not need special skills to play this game.
This game can be played by an 8-12 year old child.";

pub const TEACHER_TEXT: &str = "\"I'm going to show you the right way to unlock the boxes.
To open the boxes, you have to use a key that matches the color of the box.
So, to open this red box, I'm going to use this red key.
Great, now you can open all the doors!\"";

pub const GRAMMAR: &str = "A hypothesis is a rule written in the following language.
The rule is evaluated for one key and one box and is true when the key opens the box.

rule    := IF rule THEN rule ELSE rule | rule OR rule | rule AND rule | NOT rule | ( rule ) | atom
atom    := color_match          # key color equals box color
         | shape_match          # key shape equals box shape
         | number_match         # key number is one of the possible shape counts of the box
         | number_known         # the shape count of the box is known exactly
         | key_has_number       # the key has a number
         | key_has_shape        # the key has a shape
         | key_color_is(c)      # the key has color c
         | box_color_is(c)      # the box has color c
         | box_position_is(p)   # the box is at position p in the line-up (1 = first)
         | key_number_is(n)     # the key has number n
         | pair(k, b)           # the key has id k and the box has id b
         | TRUE | FALSE

AND binds tighter than OR. Keywords may be written in any case.
Example: IF key_has_number THEN number_match ELSE color_match";

const ORDINALS: [&str; 10] = ["first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth"];

fn article(word: &str) -> &'static str {
    if word.starts_with(['a', 'e', 'i', 'o', 'u']) {
        "an"
    } else {
        "a"
    }
}

pub fn key_line(k: &KeyDef) -> String {
    match (k.number, &k.shape) {
        (Some(n), _) => format!("The {} key is {} and has the number {}.", k.id, k.color, n),
        (None, Some(s)) => format!("The {} key is {} and has {} {} shape.", k.id, k.color, article(s), s),
        (None, None) => format!("The {} key is {}.", k.id, k.color),
    }
}

pub fn key_lines(layout: &Layout) -> String {
    let mut out = format!("Here are the {} keys (in no specific order):\n", layout.n_keys());
    for k in &layout.keys {
        out.push_str(&key_line(k));
        out.push('\n');
    }
    out
}

/// Box line-up with visible attributes only.
pub fn box_lines_partial(layout: &Layout) -> String {
    let mut out = String::from("Here are the boxes, lined up in this order:\n");
    for (i, b) in layout.boxes.iter().enumerate() {
        let ord = ORDINALS.get(i).copied().unwrap_or("next");
        out.push_str(&format!("The {ord} box is {}, has {} {} shape.\n", b.id, article(&b.shape), b.shape));
    }
    out
}

/// Box line-up with shape counts.
pub fn box_lines_full(layout: &Layout) -> String {
    let mut out = String::from("Here are the boxes, lined up in this order:\n");
    for b in &layout.boxes {
        if b.true_number == 1 {
            out.push_str(&format!("The {} box has 1 {} shape.\n", b.id, b.shape));
        } else {
            out.push_str(&format!(
                "The {} box has {} {} shapes. Each {} is numbered from 1 to {}.\n",
                b.id, b.true_number, b.shape, b.shape, b.true_number
            ));
        }
    }
    out
}

/// What is currently known about each box's shape count.
pub fn belief_lines(views: &[BoxView]) -> String {
    let mut out = String::from("Current knowledge of the number of faces with a shape on each box:\n");
    for v in views {
        if v.observed {
            out.push_str(&format!("{} (position {}): {}\n", v.id, v.position, v.number_belief.iter().next().unwrap_or(0)));
        } else {
            let opts = v.number_belief.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(", ");
            out.push_str(&format!("{} (position {}): unknown, one of {{{opts}}}\n", v.id, v.position));
        }
    }
    out
}

pub fn history_line(action: Action, outcome: Outcome, layout: &Layout) -> String {
    match action {
        Action::Attempt { box_, key } => format!(
            "Open box {} with key {}: {}",
            layout.boxdef(box_).id,
            layout.key(key).id,
            if outcome.success() { "success" } else { "failure" }
        ),
        Action::Observe { box_ } => format!("Examine {}", observe_text(&layout.boxdef(box_).id, outcome.code())),
    }
}

pub fn history(evidence: &Evidence, layout: &Layout) -> String {
    if evidence.is_empty() {
        return "(no actions yet)\n".into();
    }
    let mut out = String::new();
    for &(a, o) in evidence.records() {
        out.push_str(&history_line(a, o, layout));
        out.push('\n');
    }
    out
}

/// The single prompt of the partially observable variant. `current` is the
/// hypothesis being revised, if any.
pub fn partial_prompt(layout: &Layout, views: &[BoxView], evidence: &Evidence, current: Option<&str>) -> Vec<ChatMessage> {
    let mut user = format!(
        "For each box there is a key that opens it.
The goal of the game is to find the right key for each box, using as few actions as possible.
You have a demonstration video from a teacher telling you how to open all boxes.
In the video, the teacher says:
{TEACHER_TEXT}

Each key has an identifier (id) and a color.
Each key also has either a number or a shape, but not both.

Each box has a color. It also has a shape, which is printed on at least one of its faces.
Not all faces are visible to you initially, but the game allows you to pick up boxes and
examine them to get more information.

{}
{}
You can interact with this environment by taking two types of actions:
(1) Attempt Action: write a rule that will be used to generate opening attempts, or
(2) Observe Action: request more information about a given box.

To Take the Observe Action, your output should be exactly
\"PICK UP x\", where x is the box id (do not use any other attributes of the box)

To take an Attempt Action, write a rule that specifies a hypothesis about which keys open which boxes.
Your output should contain only the rule, absolutely nothing else.

{GRAMMAR}

Here is the history of actions taken and observed evidence.
Please use them to make your decision:

{}
{}",
        box_lines_partial(layout),
        key_lines(layout),
        history(evidence, layout),
        belief_lines(views),
    );
    if let Some(h) = current {
        user.push_str(&format!("\nYour current hypothesis performs poorly on the evidence: {h}\n"));
    }
    user.push_str("\nNow is your turn. Respond with either Observe or Attempt action.");
    vec![ChatMessage::system(SYSTEM_PROMPT), ChatMessage::user(user)]
}

/// Shared context of the fully observable variants.
pub fn context_prompt(layout: &Layout) -> String {
    format!(
        "For each box there is a key that opens it.
The goal of the game is to find the right key for each box.
You have a demonstration video from a teacher telling you how to open all boxes.
In the video, the teacher says:
{TEACHER_TEXT}

{}
{}
{GRAMMAR}",
        box_lines_full(layout),
        key_lines(layout)
    )
}

pub const GENERATE_PROMPT: &str = "Now, it is your turn to generate a hypothesis.
Your hypothesis should be a rule in the language above.

Your output should contain only the rule, absolutely nothing else.";

pub fn generate_messages(layout: &Layout) -> Vec<ChatMessage> {
    vec![ChatMessage::system(SYSTEM_PROMPT), ChatMessage::user(context_prompt(layout)), ChatMessage::user(GENERATE_PROMPT)]
}

pub fn refine_messages(layout: &Layout, hypothesis: &str, evidence: &Evidence, unreliable: bool) -> Vec<ChatMessage> {
    let caveat = if unreliable {
        "Remember that the keys and boxes are physical objects, so for some probability the
correct key might fail to open the correct box due to a mechanical failure.\n\n"
    } else {
        ""
    };
    let refine = format!(
        "Now, your task is to improve and refine an existing hypothesis that
performs poorly on existing evidence.

This is the hypothesis: {hypothesis},

Here is the evidence from previous attempts.
{caveat}{}
Generate a new hypothesis.
Your hypothesis should be a rule in the language above.
Your output should contain only the rule, absolutely nothing else.",
        history(evidence, layout)
    );
    vec![ChatMessage::system(SYSTEM_PROMPT), ChatMessage::user(context_prompt(layout)), ChatMessage::user(refine)]
}

pub fn repair_message(error: &str, allow_observe: bool) -> ChatMessage {
    let alt = if allow_observe { ", or with PICK UP x to examine box x" } else { "" };
    ChatMessage::user(format!(
        "Your response could not be used: {error}
Reply again with only a rule in the language above{alt}."
    ))
}

pub fn react_messages(layout: &Layout, evidence: &Evidence) -> Vec<ChatMessage> {
    let mut tried = String::new();
    for &(a, o) in evidence.records() {
        if let Action::Attempt { box_, key } = a {
            tried.push_str(&format!(
                "[{}, {}, {}]\n",
                layout.boxdef(box_).id,
                layout.key(key).id,
                if o.success() { "success" } else { "failure" }
            ));
        }
    }
    if tried.is_empty() {
        tried.push_str("(none yet)\n");
    }
    let user = format!(
        "For each box there is a key that opens it, so the goal of the game is to find
the right key for each box.
You have a demonstration video from a teacher telling you how to open all boxes.
In the video, the teacher says:
{TEACHER_TEXT}

{}
{}
You have already tried the following keys-box combinations:
[BOX, KEY, OUTCOME]
{tried}
Now is your turn to open the boxes.
Respond in the format \"key, box\" (e.g. \"red1, red\") and do not include any other
text in the response.",
        box_lines_full(layout),
        key_lines(layout)
    );
    vec![ChatMessage::system(SYSTEM_PROMPT), ChatMessage::user(user)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_and_box_wording() {
        let l = Layout::standard();
        assert_eq!(key_line(&l.keys[0]), "The red1 key is red and has the number 1.");
        assert_eq!(key_line(&l.keys[12]), "The purplearrow key is purple and has an arrow shape.");
        let full = box_lines_full(&l);
        assert!(full.contains("The red box has 1 moon shape.\n"));
        assert!(full.contains("The pink box has 2 cloud shapes. Each cloud is numbered from 1 to 2.\n"));
        assert!(box_lines_partial(&l).contains("The fifth box is blue, has a triangle shape."));
        assert!(!box_lines_partial(&l).contains("faces"));
    }

    #[test]
    fn partial_prompt_tracks_beliefs() {
        let l = Layout::standard();
        let mut views = l.unobserved_views();
        let p = partial_prompt(&l, &views, &Evidence::new(), None);
        assert!(p[1].content.contains("purple (position 4): unknown, one of {1, 2, 3, 4, 5}"));
        views[3] = BoxView::observed(&l.boxes[3]);
        let mut ev = Evidence::new();
        ev.push(Action::Observe { box_: crate::env::BoxIndex(3) }, Outcome::Observe { revealed: 3 });
        let p = partial_prompt(&l, &views, &ev, Some("color_match"));
        assert!(p[1].content.contains("purple (position 4): 3\n"));
        assert!(p[1].content.contains("Examine purple: 3 faces have shape on them"));
        assert!(p[1].content.contains("performs poorly on the evidence: color_match"));
    }
}
