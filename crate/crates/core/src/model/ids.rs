use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl std::borrow::Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

string_id!(
    /// Physical network node (switch, PoA, fog device, MEC/aggregation/cloud server).
    NodeId
);
string_id!(LinkId);
string_id!(VnfId);
string_id!(
    /// A service endpoint, i.e. a (service, location) pair.
    EndpointId
);
string_id!(InterfaceId);
string_id!(LocationId);
string_id!(
    /// Resource type. `cpu` is special-cased by the processing-delay model; every other kind
    /// is sized exactly to the traffic it must process.
    ResourceKind
);

impl ResourceKind {
    pub const CPU: &'static str = "cpu";

    pub fn cpu() -> Self {
        Self(Self::CPU.to_owned())
    }

    pub fn is_cpu(&self) -> bool {
        self.0 == Self::CPU
    }
}
