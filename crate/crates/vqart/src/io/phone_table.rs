use std::path::Path;

use serde::{Deserialize, Serialize};
use vqart_core::abx::{PhoneClass, PhoneInfo, PhoneInventory};

use crate::error::{Error, Result};

const MOCHA: &str = include_str!("../../tables/mocha.csv");
const PB2007: &str = include_str!("../../tables/pb2007.csv");

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    phone: String,
    class: String,
    #[serde(default)]
    place_group: String,
    #[serde(default)]
    manner_group: String,
}

/// CSV `phone,class,place_group,manner_group`; empty group cells mean
/// the phone belongs to no group.
pub fn parse_phone_table(text: &str, path: &Path) -> Result<PhoneInventory> {
    let mut inv = PhoneInventory::new();
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    for (n, row) in reader.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| Error::format(path, e.to_string()))?;
        let class = match row.class.as_str() {
            "vowel" => PhoneClass::Vowel,
            "consonant" => PhoneClass::Consonant,
            "other" => PhoneClass::Other,
            c => {
                return Err(Error::format(
                    path,
                    format!("row {}: class `{c}` is not vowel, consonant or other", n + 2),
                ))
            }
        };
        let group = |s: String| (!s.is_empty()).then_some(s);
        if inv.get(&row.phone).is_some() {
            return Err(Error::format(path, format!("phone `{}` is listed twice", row.phone)));
        }
        inv.insert(
            row.phone,
            PhoneInfo {
                class,
                place: group(row.place_group),
                manner: group(row.manner_group),
            },
        );
    }
    Ok(inv)
}

pub fn read_phone_table(path: &Path) -> Result<PhoneInventory> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_phone_table(&text, path)
}

/// The shipped table for `mocha` or `pb2007`.
pub fn builtin_phone_table(name: &str) -> Result<PhoneInventory> {
    let text = match name {
        "mocha" => MOCHA,
        "pb2007" => PB2007,
        other => return Err(Error::Usage(format!("no built-in phone table named `{other}` (try mocha or pb2007)"))),
    };
    parse_phone_table(text, Path::new(name))
}

pub fn write_phone_table(path: &Path, inventory: &PhoneInventory) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    for (phone, info) in inventory.iter() {
        let class = match info.class {
            PhoneClass::Vowel => "vowel",
            PhoneClass::Consonant => "consonant",
            PhoneClass::Other => "other",
        };
        w.serialize(Row {
            phone: phone.clone(),
            class: class.into(),
            place_group: info.place.clone().unwrap_or_default(),
            manner_group: info.manner.clone().unwrap_or_default(),
        })
        .map_err(|e| Error::format(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
