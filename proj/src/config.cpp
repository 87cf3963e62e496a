namespace memfsi {}
