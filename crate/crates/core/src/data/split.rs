use crate::error::{Error, Result};

/// The five ETH/UCY scenes in their customary order.
pub const ETH_UCY_SCENES: [&str; 5] = ["eth", "hotel", "univ", "zara1", "zara2"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<String>,
    pub test: String,
}

/// Trains on every scene except `held_out`, which becomes the test scene.
pub fn leave_one_out<S: AsRef<str>>(scenes: &[S], held_out: &str) -> Result<Split> {
    if !scenes.iter().any(|s| s.as_ref() == held_out) {
        return Err(Error::InvalidData(format!("unknown scene {held_out:?}")));
    }
    Ok(Split {
        train: scenes
            .iter()
            .map(AsRef::as_ref)
            .filter(|s| *s != held_out)
            .map(str::to_string)
            .collect(),
        test: held_out.to_string(),
    })
}
