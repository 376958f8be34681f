use wasp_core::dataset::{
    encode, load_csv, portfolio_schema, synthesize_portfolio, synthesize_portfolio_table, RawTable,
};

#[test]
fn encoded_frame_round_trips_through_csv() {
    let frame = synthesize_portfolio(120, 25, 5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("frame.csv");
    let schema = frame.write_csv(&path).unwrap();
    let back = load_csv(&path, &schema).unwrap();
    assert_eq!(back.x_sample(), frame.x_sample());
    assert_eq!(back.y_sample(), frame.y_sample());
    assert_eq!(back.x_out(), frame.x_out());
    assert_eq!(back.column_names(), frame.column_names());
}

#[test]
fn raw_table_round_trips_and_encodes_identically() {
    let table = synthesize_portfolio_table(50, 8, 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("raw.csv");
    table.write_csv(&path).unwrap();
    let reread = RawTable::read_csv(&path).unwrap();
    assert_eq!(reread, table);
    let a = encode(&table, &portfolio_schema()).unwrap();
    let b = load_csv(&path, &portfolio_schema()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.q(), 7);
}
