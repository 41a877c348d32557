//! The closed catalog of blockchain metric codes.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;

macro_rules! catalog {
    ($($variant:ident => $name:literal),+ $(,)?) => {
        /// One of the 21 daily blockchain datasets.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum MetricCode {
            $(
                #[doc = $name]
                $variant,
            )+
        }

        impl MetricCode {
            /// Every code, in alphabetical order.
            pub const ALL: [MetricCode; 21] = [$(MetricCode::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(MetricCode::$variant => stringify!($variant),)+
                }
            }

            pub fn description(self) -> &'static str {
                match self {
                    $(MetricCode::$variant => $name,)+
                }
            }
        }

        impl FromStr for MetricCode {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self, Error> {
                match s.trim().to_ascii_uppercase().as_str() {
                    $(stringify!($variant) => Ok(MetricCode::$variant),)+
                    _ => Err(Error::UnknownMetric(s.to_string())),
                }
            }
        }
    };
}

catalog! {
    ATRCT => "Median Transaction Confirmation Time",
    AVBLS => "Average Block Size",
    BLCHS => "Api Block-Chain Size",
    CPTRA => "Cost Per Transaction",
    DIFF => "Difficulty",
    ETRAV => "Estimated Transaction Volume",
    ETRVU => "Estimated Transaction Volume USD",
    HRATE => "Hash Rate",
    MIREV => "Miners Revenue",
    MKPRU => "Market Price USD",
    MKTCP => "Market Capitalization",
    MWNUS => "My Wallet Number of Users",
    NADDU => "Addresses Used",
    NTRAN => "Number of Transactions",
    NTRAT => "Total Number of Transactions",
    NTRBL => "Number of Transactions per Block",
    NTREP => "Number of Transactions Excluding Popular Addresses",
    TOUTV => "Total Output Volume",
    TRFEE => "Total Transaction Fees",
    TRFUS => "Total Transaction Fees USD",
    TRVOU => "USD Exchange Trade Volume",
}

impl MetricCode {
    /// Metrics that grow monotonically with time, so their plain ribbon lines
    /// never cross. They are traded through derivative ribbons instead.
    pub const MONOTONIC: [MetricCode; 3] = [MetricCode::MWNUS, MetricCode::NTRAT, MetricCode::BLCHS];

    /// The Bitcoin closing price series.
    pub const PRICE: MetricCode = MetricCode::MKPRU;

    pub fn is_monotonic(self) -> bool {
        Self::MONOTONIC.contains(&self)
    }

    /// The 18 metrics amenable to the plain ribbon technique.
    pub fn ribbon_metrics() -> impl Iterator<Item = MetricCode> {
        Self::ALL.into_iter().filter(|c| !c.is_monotonic())
    }

    /// Parses a comma-separated list, or `all`.
    pub fn parse_list(s: &str) -> Result<Vec<MetricCode>, Error> {
        if s.trim().eq_ignore_ascii_case("all") {
            return Ok(Self::ALL.to_vec());
        }
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let code: MetricCode = part.parse()?;
            if !out.contains(&code) {
                out.push(code);
            }
        }
        Ok(out)
    }
}

impl fmt::Display for MetricCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
