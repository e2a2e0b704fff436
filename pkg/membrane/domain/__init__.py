# Domain layer - typed models shared by services, repositories and the CLI
