# harness - qsp command-line runs: config, family catalog, verify / simulate / eval
