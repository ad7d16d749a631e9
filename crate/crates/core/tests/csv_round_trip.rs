use intraday_paths::market_data::{
    aggregate_vwap, generate_synthetic_market, load_auction_prices, load_fundamentals,
    load_transactions, write_auction_prices, write_fundamentals, write_transactions,
    SyntheticMarketConfig,
};

#[test]
fn synthetic_market_survives_csv() {
    let market = generate_synthetic_market(&SyntheticMarketConfig {
        n_days: 2,
        deliveries_per_day: 4,
        ..Default::default()
    })
    .unwrap();

    let mut buf = Vec::new();
    write_transactions(&mut buf, &market.transactions).unwrap();
    let trades = load_transactions(buf.as_slice()).unwrap();
    assert_eq!(trades, market.transactions);

    let mut buf = Vec::new();
    write_fundamentals(&mut buf, &market.fundamentals).unwrap();
    let mut expected = market.fundamentals.clone();
    expected.sort_by(|a, b| a.name.cmp(&b.name));
    assert_eq!(load_fundamentals(buf.as_slice()).unwrap(), expected);

    let mut buf = Vec::new();
    write_auction_prices(&mut buf, &market.auction_prices).unwrap();
    assert_eq!(
        load_auction_prices(buf.as_slice()).unwrap(),
        market.auction_prices
    );

    let clock = intraday_paths::market_data::MarketClock::default();
    for grid in &market.grids {
        let own: Vec<_> = trades
            .iter()
            .filter(|t| t.delivery == grid.delivery)
            .cloned()
            .collect();
        let auction = market
            .auction_prices
            .iter()
            .find(|(d, _)| *d == grid.delivery)
            .unwrap()
            .1;
        assert_eq!(
            &aggregate_vwap(&own, grid.delivery, auction, &clock).unwrap(),
            grid
        );
    }
}

#[test]
fn malformed_rows_are_rejected() {
    let bad =
        "trade_id,timestamp_utc,delivery_day,delivery_quarter,price_eur_mwh,volume_mwh,market_id\n\
               a,2020-01-06T10:00:00Z,2020-01-06,97,40.0,1.0,x\n";
    assert!(load_transactions(bad.as_bytes()).is_err());
}
