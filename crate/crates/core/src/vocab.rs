//! Closed vocabularies that travel as plain strings on the wire.

use alloc::string::String;
use core::fmt;

use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

/// A closed set of named values with a fixed wire spelling.
pub trait Vocab: Copy + Sized + 'static {
    const ALL: &'static [Self];
    fn as_str(self) -> &'static str;
    fn parse(s: &str) -> Option<Self>;
}

macro_rules! vocab {
    (
        $(#[$meta:meta])*
        $vis:vis enum $name:ident {
            $( $(#[$vmeta:meta])* $variant:ident => $wire:literal ),+ $(,)?
        }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        $vis enum $name {
            $( $(#[$vmeta])* $variant ),+
        }

        impl $crate::vocab::Vocab for $name {
            const ALL: &'static [Self] = &[$($name::$variant),+];

            fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $wire),+
                }
            }

            fn parse(s: &str) -> Option<Self> {
                match s {
                    $($wire => Some($name::$variant),)+
                    _ => None,
                }
            }
        }

        impl $name {
            pub const ALL: &'static [$name] = <$name as $crate::vocab::Vocab>::ALL;

            pub fn as_str(self) -> &'static str {
                <$name as $crate::vocab::Vocab>::as_str(self)
            }

            pub fn parse(s: &str) -> Option<Self> {
                <$name as $crate::vocab::Vocab>::parse(s)
            }
        }

        impl core::fmt::Display for $name {
            fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl serde::Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.as_str())
            }
        }

        impl<'de> serde::Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let raw = <alloc::string::String as serde::Deserialize>::deserialize(d)?;
                $name::parse(&raw).ok_or_else(|| {
                    <D::Error as serde::de::Error>::unknown_variant(&raw, &[$($wire),+])
                })
            }
        }
    };
}

/// A vocabulary slot in a raw frame: either a recognised value or the
/// verbatim string the interpreter produced.
///
/// Raw frames keep unrecognised spellings so the repair layer can report or
/// normalize them instead of the parser silently failing.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Token<T> {
    Known(T),
    Raw(String),
}

impl<T: Vocab> Token<T> {
    pub fn known(&self) -> Option<T> {
        match self {
            Token::Known(v) => Some(*v),
            Token::Raw(_) => None,
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            Token::Known(v) => v.as_str(),
            Token::Raw(s) => s,
        }
    }

    pub fn is(&self, v: T) -> bool
    where
        T: PartialEq,
    {
        self.known() == Some(v)
    }
}

impl<T: Vocab> From<T> for Token<T> {
    fn from(v: T) -> Self {
        Token::Known(v)
    }
}

impl<T: Vocab> From<&str> for Token<T> {
    fn from(s: &str) -> Self {
        T::parse(s).map_or_else(|| Token::Raw(s.into()), Token::Known)
    }
}

impl<T: Vocab> PartialOrd for Token<T>
where
    T: Eq,
{
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Vocab> Ord for Token<T>
where
    T: Eq,
{
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        self.as_str().cmp(other.as_str())
    }
}

impl<T: Vocab> fmt::Display for Token<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl<T: Vocab> Serialize for Token<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de, T: Vocab> Deserialize<'de> for Token<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V<T>(core::marker::PhantomData<T>);
        impl<T: Vocab> de::Visitor<'_> for V<T> {
            type Value = Token<T>;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a string")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
                Ok(Token::from(v))
            }
        }
        d.deserialize_str(V(core::marker::PhantomData))
    }
}
