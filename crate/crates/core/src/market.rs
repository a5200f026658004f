//! P2P energy order lifecycle: submission with balance escrow,
//! contribution-priority matching, delivery recording and settlement.
//!
//! Money is integer milli-currency and energy integer kW so that account
//! conservation holds exactly. Buy orders escrow `quantity * unit_price` on
//! acceptance; settlement pays the seller for delivered energy capped at the
//! contracted amount and refunds the rest.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::contribution::{ContributionList, TradeRecord};
use crate::types::{NodeId, Tick};

/// Money in milli-currency units.
pub type Money = u64;
/// Energy in whole kW.
pub type Energy = u64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct OrderId(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct MatchId(pub u64);

#[derive(Debug, Error, PartialEq)]
pub enum MarketError {
    #[error("order is invalid: {0}")]
    InvalidOrder(&'static str),
    #[error("unknown order {0:?}")]
    UnknownOrder(OrderId),
    #[error("unknown match {0:?}")]
    UnknownMatch(MatchId),
    #[error("unknown account for node {0}")]
    UnknownAccount(NodeId),
    #[error("delivery recorded after settlement")]
    StaleDelivery,
    #[error("delivery already recorded for this match")]
    DuplicateDelivery,
    #[error("match cannot settle before delivery or deadline")]
    NotSettleable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Buy,
    Sell,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrderState {
    Open,
    Matched,
    Delivered,
    Settled,
    Expired,
}

#[derive(Clone, Debug)]
pub struct Order {
    pub id: OrderId,
    pub side: Side,
    pub owner: NodeId,
    pub quantity: Energy,
    pub unit_price: Money,
    pub latest_delivery: Tick,
    pub state: OrderState,
}

/// Submission request; the book assigns the id.
#[derive(Clone, Copy, Debug)]
pub struct OrderSpec {
    pub side: Side,
    pub owner: NodeId,
    pub quantity: Energy,
    pub unit_price: Money,
    pub latest_delivery: Tick,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SubmitOutcome {
    Accepted(OrderId),
    Rejected(RejectReason),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RejectReason {
    InsufficientBalance { required: Money, available: Money },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Account {
    pub node_id: NodeId,
    pub balance: Money,
    pub escrow: Money,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatchState {
    Pending,
    Delivered,
    Settled,
}

/// A buy/sell pairing awaiting delivery and settlement.
#[derive(Clone, Debug)]
pub struct MatchRecord {
    pub id: MatchId,
    pub buy_order: OrderId,
    pub sell_order: OrderId,
    pub buyer: NodeId,
    pub seller: NodeId,
    pub quantity: Energy,
    pub unit_price: Money,
    pub latest_delivery: Tick,
    pub round_index: u64,
    pub state: MatchState,
    pub delivery: Option<TradeRecord>,
}

/// Settlement transaction emitted for the round's block.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Settlement {
    pub match_id: MatchId,
    pub round_index: u64,
    pub buyer: NodeId,
    pub seller: NodeId,
    pub energy_contracted: Energy,
    pub energy_delivered: Energy,
    pub unit_price: Money,
    pub amount_paid: Money,
    pub refund: Money,
}

impl Settlement {
    /// Canonical byte form hashed into blocks and compared by voters.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64);
        out.extend_from_slice(&self.match_id.0.to_be_bytes());
        out.extend_from_slice(&self.round_index.to_be_bytes());
        out.extend_from_slice(&self.buyer.0.to_be_bytes());
        out.extend_from_slice(&self.seller.0.to_be_bytes());
        out.extend_from_slice(&self.energy_contracted.to_be_bytes());
        out.extend_from_slice(&self.energy_delivered.to_be_bytes());
        out.extend_from_slice(&self.unit_price.to_be_bytes());
        out.extend_from_slice(&self.amount_paid.to_be_bytes());
        out.extend_from_slice(&self.refund.to_be_bytes());
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MarketPhase {
    SupplyExceedsDemand,
    DemandExceedsSupply,
}

/// A matched seller outranked by a compatible unmatched seller with
/// strictly higher CE: the condition the priority audit looks for.
#[derive(Clone, Debug)]
pub struct PriorityViolation {
    pub unmatched_order: OrderId,
    pub unmatched_owner: NodeId,
    pub matched: MatchId,
}

#[derive(Clone, Debug, Default)]
pub struct Market {
    orders: BTreeMap<OrderId, Order>,
    matches: BTreeMap<MatchId, MatchRecord>,
    accounts: BTreeMap<NodeId, Account>,
    seller_trades: BTreeMap<(u64, NodeId), u32>,
    next_order: u64,
    next_match: u64,
}

impl Market {
    pub fn new() -> Self {
        Market::default()
    }

    pub fn open_account(&mut self, node_id: NodeId, balance: Money) {
        self.accounts.entry(node_id).or_insert(Account {
            node_id,
            balance,
            escrow: 0,
        });
    }

    pub fn account(&self, node_id: NodeId) -> Option<&Account> {
        self.accounts.get(&node_id)
    }

    pub fn order(&self, id: OrderId) -> Option<&Order> {
        self.orders.get(&id)
    }

    pub fn match_record(&self, id: MatchId) -> Option<&MatchRecord> {
        self.matches.get(&id)
    }

    /// Sum of balances and escrows over all accounts; conserved by every
    /// market operation.
    pub fn total_funds(&self) -> Money {
        self.accounts
            .values()
            .map(|a| a.balance + a.escrow)
            .sum()
    }

    /// Accepts an order into the book, escrowing funds for buys. Sellers
    /// escrow energy, not money, so a zero balance still sells.
    pub fn submit_order(
        &mut self,
        spec: OrderSpec,
        now: Tick,
    ) -> Result<SubmitOutcome, MarketError> {
        if spec.quantity == 0 {
            return Err(MarketError::InvalidOrder("quantity must be positive"));
        }
        if spec.unit_price == 0 {
            return Err(MarketError::InvalidOrder("unit price must be positive"));
        }
        if spec.latest_delivery < now {
            return Err(MarketError::InvalidOrder("delivery deadline in the past"));
        }
        let account = self
            .accounts
            .get_mut(&spec.owner)
            .ok_or(MarketError::UnknownAccount(spec.owner))?;
        if spec.side == Side::Buy {
            let required = spec.quantity * spec.unit_price;
            if account.balance < required {
                return Ok(SubmitOutcome::Rejected(RejectReason::InsufficientBalance {
                    required,
                    available: account.balance,
                }));
            }
            account.balance -= required;
            account.escrow += required;
        }
        let id = OrderId(self.next_order);
        self.next_order += 1;
        self.orders.insert(
            id,
            Order {
                id,
                side: spec.side,
                owner: spec.owner,
                quantity: spec.quantity,
                unit_price: spec.unit_price,
                latest_delivery: spec.latest_delivery,
                state: OrderState::Open,
            },
        );
        Ok(SubmitOutcome::Accepted(id))
    }

    fn open_ids(&self, side: Side, now: Tick) -> Vec<OrderId> {
        self.orders
            .values()
            .filter(|o| o.side == side && o.state == OrderState::Open && o.latest_delivery >= now)
            .map(|o| o.id)
            .collect()
    }

    /// Which side is scarce right now: sellers rank when supply covers
    /// demand, buyers rank when it does not.
    pub fn infer_phase(&self, now: Tick) -> MarketPhase {
        let supply: Energy = self
            .open_ids(Side::Sell, now)
            .iter()
            .map(|id| self.orders[id].quantity)
            .sum();
        let demand: Energy = self
            .open_ids(Side::Buy, now)
            .iter()
            .map(|id| self.orders[id].quantity)
            .sum();
        if supply >= demand {
            MarketPhase::SupplyExceedsDemand
        } else {
            MarketPhase::DemandExceedsSupply
        }
    }

    /// Ranks order ids for the priority side: flagged owners last, then CE
    /// descending, ties by owner id then order id.
    fn priority_rank(
        &self,
        ids: &mut [OrderId],
        priority: &ContributionList,
        flagged: &BTreeSet<NodeId>,
    ) {
        ids.sort_by(|a, b| {
            let oa = &self.orders[a];
            let ob = &self.orders[b];
            let fa = flagged.contains(&oa.owner);
            let fb = flagged.contains(&ob.owner);
            let ca = priority.ce_of(oa.owner).unwrap_or(0.0);
            let cb = priority.ce_of(ob.owner).unwrap_or(0.0);
            fa.cmp(&fb)
                .then(cb.partial_cmp(&ca).expect("finite CE"))
                .then(oa.owner.cmp(&ob.owner))
                .then(a.cmp(b))
        });
    }

    /// Counterparty ordering: best price first (descending for buys,
    /// ascending for sells), flagged owners last, ties by order id.
    fn counterparty_rank(&self, ids: &mut [OrderId], flagged: &BTreeSet<NodeId>) {
        ids.sort_by(|a, b| {
            let oa = &self.orders[a];
            let ob = &self.orders[b];
            let fa = flagged.contains(&oa.owner);
            let fb = flagged.contains(&ob.owner);
            let price = match oa.side {
                Side::Buy => ob.unit_price.cmp(&oa.unit_price),
                Side::Sell => oa.unit_price.cmp(&ob.unit_price),
            };
            fa.cmp(&fb).then(price).then(a.cmp(b))
        });
    }

    fn compatible(buy: &Order, sell: &Order, now: Tick) -> bool {
        buy.owner != sell.owner
            && buy.unit_price >= sell.unit_price
            && buy.latest_delivery.min(sell.latest_delivery) >= now
    }

    /// Carves `take` units out of `id` into a fresh order and returns the
    /// new id. The original keeps the remainder and stays open, so the
    /// matching pass keeps filling it.
    fn split_order(&mut self, id: OrderId, take: Energy) -> OrderId {
        let matched_part = {
            let order = &self.orders[&id];
            debug_assert!(take < order.quantity);
            Order {
                id: OrderId(self.next_order),
                quantity: take,
                ..order.clone()
            }
        };
        self.next_order += 1;
        let matched_id = matched_part.id;
        self.orders.insert(matched_id, matched_part);
        self.orders.get_mut(&id).expect("split source").quantity -= take;
        matched_id
    }

    /// Matches open orders with the scarce side ranked by contribution.
    ///
    /// When supply exceeds demand, sellers are taken in descending-CE order
    /// (flagged owners last) and filled against the best-priced compatible
    /// buys; the mirrored rule applies under scarcity. Trade price is the
    /// seller's ask. Partial fills split orders. Returns new match ids.
    pub fn match_orders(
        &mut self,
        priority: &ContributionList,
        flagged: &BTreeSet<NodeId>,
        phase: MarketPhase,
        now: Tick,
        round_index: u64,
    ) -> Vec<MatchId> {
        let mut created = Vec::new();
        let (ranked_side, other_side) = match phase {
            MarketPhase::SupplyExceedsDemand => (Side::Sell, Side::Buy),
            MarketPhase::DemandExceedsSupply => (Side::Buy, Side::Sell),
        };
        let mut ranked = self.open_ids(ranked_side, now);
        self.priority_rank(&mut ranked, priority, flagged);

        for ranked_id in ranked {
            let mut counterparties = self.open_ids(other_side, now);
            self.counterparty_rank(&mut counterparties, flagged);
            for counter_id in counterparties {
                if self.orders[&ranked_id].state != OrderState::Open {
                    break;
                }
                if self.orders[&counter_id].state != OrderState::Open {
                    continue;
                }
                let (buy_id, sell_id) = match ranked_side {
                    Side::Sell => (counter_id, ranked_id),
                    Side::Buy => (ranked_id, counter_id),
                };
                let (buy, sell) = (&self.orders[&buy_id], &self.orders[&sell_id]);
                if !Self::compatible(buy, sell, now) {
                    continue;
                }
                let fill = buy.quantity.min(sell.quantity);
                let buy_id = if fill < self.orders[&buy_id].quantity {
                    self.split_order(buy_id, fill)
                } else {
                    buy_id
                };
                let sell_id = if fill < self.orders[&sell_id].quantity {
                    self.split_order(sell_id, fill)
                } else {
                    sell_id
                };
                let price = self.orders[&sell_id].unit_price;
                let deadline = self.orders[&buy_id]
                    .latest_delivery
                    .min(self.orders[&sell_id].latest_delivery);
                let buyer = self.orders[&buy_id].owner;
                let seller = self.orders[&sell_id].owner;
                self.orders.get_mut(&buy_id).expect("buy exists").state = OrderState::Matched;
                self.orders.get_mut(&sell_id).expect("sell exists").state = OrderState::Matched;

                let id = MatchId(self.next_match);
                self.next_match += 1;
                self.matches.insert(
                    id,
                    MatchRecord {
                        id,
                        buy_order: buy_id,
                        sell_order: sell_id,
                        buyer,
                        seller,
                        quantity: fill,
                        unit_price: price,
                        latest_delivery: deadline,
                        round_index,
                        state: MatchState::Pending,
                        delivery: None,
                    },
                );
                created.push(id);
            }
        }
        created
    }

    /// Records the energy actually delivered for a match, producing the
    /// trade record that feeds the seller's contribution.
    pub fn record_delivery(
        &mut self,
        match_id: MatchId,
        delivered: Energy,
        now: Tick,
    ) -> Result<TradeRecord, MarketError> {
        let record = self
            .matches
            .get_mut(&match_id)
            .ok_or(MarketError::UnknownMatch(match_id))?;
        match record.state {
            MatchState::Settled => return Err(MarketError::StaleDelivery),
            MatchState::Delivered => return Err(MarketError::DuplicateDelivery),
            MatchState::Pending => {}
        }
        let ordinal = self
            .seller_trades
            .entry((record.round_index, record.seller))
            .or_insert(0);
        *ordinal += 1;
        let trade = TradeRecord {
            order_id: record.sell_order.0,
            p_order: record.quantity as f64,
            p_real: delivered as f64,
            round_index: record.round_index,
            intra_round_ordinal: *ordinal,
        };
        record.state = MatchState::Delivered;
        record.delivery = Some(trade.clone());
        let _ = now;
        for order_id in [record.buy_order, record.sell_order] {
            self.orders
                .get_mut(&order_id)
                .expect("matched order exists")
                .state = OrderState::Delivered;
        }
        Ok(trade)
    }

    /// Settles a match: the buyer pays for delivered energy capped at the
    /// contracted amount, the rest of the escrow is refunded. A pending
    /// match past its deadline settles as a zero delivery.
    pub fn settle(&mut self, match_id: MatchId, now: Tick) -> Result<Settlement, MarketError> {
        let state = self
            .matches
            .get(&match_id)
            .ok_or(MarketError::UnknownMatch(match_id))?
            .state;
        match state {
            MatchState::Settled => return Err(MarketError::NotSettleable),
            MatchState::Delivered => {}
            MatchState::Pending => {
                let deadline = self.matches[&match_id].latest_delivery;
                if now <= deadline {
                    return Err(MarketError::NotSettleable);
                }
                self.record_delivery(match_id, 0, now)?;
            }
        }
        let record = self.matches.get_mut(&match_id).expect("checked above");
        let trade = record.delivery.as_ref().expect("delivered state");
        let delivered = trade.p_real as Energy;
        let escrowed = record.quantity * record.unit_price;
        let paid = delivered.min(record.quantity) * record.unit_price;
        let refund = escrowed - paid;
        record.state = MatchState::Settled;
        let settlement = Settlement {
            match_id,
            round_index: record.round_index,
            buyer: record.buyer,
            seller: record.seller,
            energy_contracted: record.quantity,
            energy_delivered: delivered,
            unit_price: record.unit_price,
            amount_paid: paid,
            refund,
        };
        let (buy_order, sell_order) = (record.buy_order, record.sell_order);
        let (buyer, seller) = (record.buyer, record.seller);

        let buyer_account = self
            .accounts
            .get_mut(&buyer)
            .ok_or(MarketError::UnknownAccount(buyer))?;
        buyer_account.escrow -= escrowed;
        buyer_account.balance += refund;
        let seller_account = self
            .accounts
            .get_mut(&seller)
            .ok_or(MarketError::UnknownAccount(seller))?;
        seller_account.balance += paid;

        for order_id in [buy_order, sell_order] {
            self.orders
                .get_mut(&order_id)
                .expect("matched order exists")
                .state = OrderState::Settled;
        }
        Ok(settlement)
    }

    /// Drops settled and expired records so the book only holds live
    /// state; the blockchain keeps the durable settlement history.
    pub fn prune_closed(&mut self, before_round: u64) {
        self.orders.retain(|_, o| {
            !matches!(o.state, OrderState::Settled | OrderState::Expired)
        });
        self.matches.retain(|_, m| m.state != MatchState::Settled);
        self.seller_trades.retain(|(round, _), _| *round >= before_round);
    }

    /// Expires every still-open order, refunding buy escrows. Called at
    /// round end once all deadlines have passed.
    pub fn expire_open_orders(&mut self) -> Vec<OrderId> {
        let mut expired = Vec::new();
        let ids: Vec<OrderId> = self
            .orders
            .values()
            .filter(|o| o.state == OrderState::Open)
            .map(|o| o.id)
            .collect();
        for id in ids {
            let (side, owner, quantity, price) = {
                let order = &self.orders[&id];
                (order.side, order.owner, order.quantity, order.unit_price)
            };
            if side == Side::Buy {
                let account = self.accounts.get_mut(&owner).expect("account exists");
                let escrowed = quantity * price;
                account.escrow -= escrowed;
                account.balance += escrowed;
            }
            self.orders.get_mut(&id).expect("order exists").state = OrderState::Expired;
            expired.push(id);
        }
        expired
    }

    /// Post-hoc audit of the seller-priority rule: reports every still-open
    /// sell order from a non-flagged owner with strictly higher CE than a
    /// matched seller, where the open order was compatible with the buy
    /// that seller received.
    pub fn audit_seller_priority(
        &self,
        new_matches: &[MatchId],
        priority: &ContributionList,
        flagged: &BTreeSet<NodeId>,
        now: Tick,
    ) -> Vec<PriorityViolation> {
        let mut violations = Vec::new();
        for open_id in self.open_ids(Side::Sell, now) {
            let open_order = &self.orders[&open_id];
            if flagged.contains(&open_order.owner) {
                continue;
            }
            let open_ce = priority.ce_of(open_order.owner).unwrap_or(0.0);
            for match_id in new_matches {
                let record = &self.matches[match_id];
                let matched_ce = if flagged.contains(&record.seller) {
                    f64::NEG_INFINITY
                } else {
                    priority.ce_of(record.seller).unwrap_or(0.0)
                };
                if open_ce <= matched_ce {
                    continue;
                }
                let buy = &self.orders[&record.buy_order];
                let price_ok = buy.unit_price >= open_order.unit_price;
                let window_ok = buy.latest_delivery.min(open_order.latest_delivery) >= now;
                if price_ok && window_ok && buy.owner != open_order.owner {
                    violations.push(PriorityViolation {
                        unmatched_order: open_id,
                        unmatched_owner: open_order.owner,
                        matched: *match_id,
                    });
                }
            }
        }
        violations
    }
}
