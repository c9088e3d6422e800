use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::Bound;

use chrono::{Datelike, NaiveDate, Weekday};

use super::{LinkRecord, Route, RouteRecord, TodInterval};
use crate::error::{Error, Result};

/// `(link_id, date, tod_start_s, tod_end_s)`.
pub type LinkKey = (String, NaiveDate, u32, u32);
/// `(route_id, date, tod_start_s, tod_end_s)`.
pub type RouteKey = (String, NaiveDate, u32, u32);

/// In-memory FCD dataset, immutable once built.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    links: BTreeMap<LinkKey, LinkRecord>,
    routes: BTreeMap<RouteKey, RouteRecord>,
    geometry: BTreeMap<String, Route>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_link_record(&mut self, record: LinkRecord) -> Result<()> {
        record.validate()?;
        let key = (
            record.link_id.clone(),
            record.date,
            record.tod.start(),
            record.tod.end(),
        );
        if self.links.contains_key(&key) {
            return Err(Error::InvalidRecord {
                record: record.identity(),
                reason: "duplicate key".into(),
            });
        }
        self.links.insert(key, record);
        Ok(())
    }

    pub fn insert_route_record(&mut self, record: RouteRecord) -> Result<()> {
        record.validate()?;
        let key = (
            record.route_id.clone(),
            record.date,
            record.tod.start(),
            record.tod.end(),
        );
        if self.routes.contains_key(&key) {
            return Err(Error::InvalidRecord {
                record: record.identity(),
                reason: "duplicate key".into(),
            });
        }
        self.routes.insert(key, record);
        Ok(())
    }

    pub fn add_route(&mut self, route: Route) {
        self.geometry.insert(route.id.clone(), route);
    }

    pub fn with_routes(mut self, routes: impl IntoIterator<Item = Route>) -> Self {
        for r in routes {
            self.add_route(r);
        }
        self
    }

    pub fn route(&self, id: &str) -> Result<&Route> {
        self.geometry.get(id).ok_or_else(|| Error::UnknownRoute(id.to_string()))
    }

    pub fn routes(&self) -> impl Iterator<Item = &Route> {
        self.geometry.values()
    }

    pub fn link_records(&self) -> impl Iterator<Item = &LinkRecord> {
        self.links.values()
    }

    pub fn route_records(&self) -> impl Iterator<Item = &RouteRecord> {
        self.routes.values()
    }

    pub fn link_record(&self, key: &LinkKey) -> Option<&LinkRecord> {
        self.links.get(key)
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty() && self.routes.is_empty()
    }

    pub fn len(&self) -> usize {
        self.links.len() + self.routes.len()
    }

    /// Number of distinct link ids with at least one record.
    pub fn link_count(&self) -> usize {
        self.links
            .keys()
            .map(|(id, ..)| id.as_str())
            .collect::<BTreeSet<_>>()
            .len()
    }

    /// All records of `link_id` on `date`, in time-of-day order.
    pub fn link_records_on(&self, link_id: &str, date: NaiveDate) -> impl Iterator<Item = &LinkRecord> {
        let lo = (link_id.to_string(), date, 0, 0);
        let hi = (link_id.to_string(), date, u32::MAX, u32::MAX);
        self.links
            .range((Bound::Included(lo), Bound::Included(hi)))
            .map(|(_, r)| r)
    }

    /// All records of `route_id` on `date`, in time-of-day order.
    pub fn route_records_on(&self, route_id: &str, date: NaiveDate) -> impl Iterator<Item = &RouteRecord> {
        let lo = (route_id.to_string(), date, 0, 0);
        let hi = (route_id.to_string(), date, u32::MAX, u32::MAX);
        self.routes
            .range((Bound::Included(lo), Bound::Included(hi)))
            .map(|(_, r)| r)
    }

    /// Dates with at least one record for the route or any of its links.
    pub fn dates_for_route(&self, route: &Route) -> BTreeSet<NaiveDate> {
        let ids: BTreeSet<&str> = route.links().iter().map(|l| l.id.as_str()).collect();
        self.links
            .keys()
            .filter(|(id, ..)| ids.contains(id.as_str()))
            .map(|(_, d, ..)| *d)
            .chain(
                self.routes
                    .keys()
                    .filter(|(id, ..)| *id == route.id)
                    .map(|(_, d, ..)| *d),
            )
            .collect()
    }

    /// Position of each link in the geometry, used for result ordering.
    fn link_order(&self) -> HashMap<&str, usize> {
        let mut order = HashMap::new();
        for route in self.geometry.values() {
            for link in route.links() {
                order.entry(link.id.as_str()).or_insert(link.index_on_route);
            }
        }
        order
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryTarget {
    Link,
    Route,
}

/// Request parameters for retrieving records.
#[derive(Debug, Clone, PartialEq)]
pub struct FcdQuery {
    pub target: QueryTarget,
    pub date_range: (NaiveDate, NaiveDate),
    pub days_of_week: Vec<Weekday>,
    pub tod: TodInterval,
    pub full_traversal: bool,
}

impl FcdQuery {
    /// A query over every day of the week and the whole day.
    pub fn new(target: QueryTarget, first: NaiveDate, last: NaiveDate) -> Result<Self> {
        let q = Self {
            target,
            date_range: (first, last),
            days_of_week: vec![
                Weekday::Mon,
                Weekday::Tue,
                Weekday::Wed,
                Weekday::Thu,
                Weekday::Fri,
                Weekday::Sat,
                Weekday::Sun,
            ],
            tod: TodInterval::whole_day(),
            full_traversal: false,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn days(mut self, days: impl IntoIterator<Item = Weekday>) -> Result<Self> {
        self.days_of_week = days.into_iter().collect();
        self.validate()?;
        Ok(self)
    }

    pub fn tod(mut self, tod: TodInterval) -> Self {
        self.tod = tod;
        self
    }

    pub fn full_traversal(mut self, on: bool) -> Self {
        self.full_traversal = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.date_range.0 > self.date_range.1 {
            return Err(Error::InvalidParameter(format!(
                "empty date range {} .. {}",
                self.date_range.0, self.date_range.1
            )));
        }
        if self.days_of_week.is_empty() {
            return Err(Error::InvalidParameter("no days of week selected".into()));
        }
        Ok(())
    }

    fn matches(&self, date: NaiveDate, tod: &TodInterval, full_traversal: bool) -> bool {
        date >= self.date_range.0
            && date <= self.date_range.1
            && self.days_of_week.contains(&date.weekday())
            && tod.overlaps(&self.tod)
            && (!self.full_traversal || full_traversal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QueryRecord<'a> {
    Link(&'a LinkRecord),
    Route(&'a RouteRecord),
}

impl QueryRecord<'_> {
    pub fn date(&self) -> NaiveDate {
        match self {
            QueryRecord::Link(r) => r.date,
            QueryRecord::Route(r) => r.date,
        }
    }

    pub fn tod(&self) -> TodInterval {
        match self {
            QueryRecord::Link(r) => r.tod,
            QueryRecord::Route(r) => r.tod,
        }
    }
}

/// Records matching the query, ordered by date, time of day and position of
/// the link along its route.
///
/// A record matches when its interval overlaps the requested one.
pub fn query<'a>(dataset: &'a Dataset, q: &FcdQuery) -> Vec<QueryRecord<'a>> {
    match q.target {
        QueryTarget::Link => {
            let order = dataset.link_order();
            let mut hits: Vec<&LinkRecord> = dataset
                .links
                .values()
                .filter(|r| q.matches(r.date, &r.tod, r.full_traversal))
                .collect();
            hits.sort_by(|a, b| {
                let pos = |r: &LinkRecord| order.get(r.link_id.as_str()).copied().unwrap_or(usize::MAX);
                (a.date, a.tod.start(), pos(a), &a.link_id).cmp(&(b.date, b.tod.start(), pos(b), &b.link_id))
            });
            hits.into_iter().map(QueryRecord::Link).collect()
        }
        QueryTarget::Route => {
            let mut hits: Vec<&RouteRecord> = dataset
                .routes
                .values()
                .filter(|r| q.matches(r.date, &r.tod, r.full_traversal))
                .collect();
            hits.sort_by(|a, b| (a.date, a.tod.start(), &a.route_id).cmp(&(b.date, b.tod.start(), &b.route_id)));
            hits.into_iter().map(QueryRecord::Route).collect()
        }
    }
}
