# Domain types and instance files
