from nvccdd.cli import main

raise SystemExit(main())
