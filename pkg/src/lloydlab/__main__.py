from lloydlab.cli import main

raise SystemExit(main())
